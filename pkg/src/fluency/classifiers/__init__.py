"""From-scratch classifiers: SMO SVM, random forest and MLP."""
from .forest import ForestModel, rf_predict, rf_predict_proba, rf_train
from .mlp import MlpModel, mlp_predict, mlp_predict_proba, mlp_train
from .pipeline import MODEL_KINDS, FittedPipeline, ModelSpec, train_model
from .serialize import load_model, save_model
from .standardize import Standardizer, standardize_apply, standardize_fit
from .svm import SvmModel, svm_predict, svm_train, svm_vote_scores

__all__ = [
    "MODEL_KINDS", "FittedPipeline", "ForestModel", "MlpModel", "ModelSpec", "Standardizer",
    "SvmModel", "load_model", "mlp_predict", "mlp_predict_proba", "mlp_train", "rf_predict",
    "rf_predict_proba", "rf_train", "save_model", "standardize_apply", "standardize_fit",
    "svm_predict", "svm_train", "svm_vote_scores", "train_model",
]
