import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fluency.dsp import FeatureConfig, extract_segment, rmse_frames
from fluency.errors import ConfigError, CorpusError
from fluency.segmentation import FluencyClass, load_manifest
from fluency.synth import (DEFAULT_PROFILES, PEAK_AMPLITUDE, ClassProfile, generate_corpus,
                           generate_segment, measured_pause_fraction)

from oracles import nearest_centroid_accuracy

CFG = FeatureConfig()
LOW, MID, HIGH = DEFAULT_PROFILES


@pytest.fixture(scope="module")
def population():
    """100 segments per class: (rmse, zcr, sf) means and measured pause fractions."""
    out = {}
    for p in DEFAULT_PROFILES:
        feats, pauses = [], []
        for i in range(100):
            x = generate_segment(p, (123, int(p.label), i))
            fv = extract_segment(x, CFG)
            feats.append([fv["rmse"], fv["zcr"], fv["sf"]])
            pauses.append(measured_pause_fraction(x))
        out[p.label] = (np.array(feats), np.array(pauses))
    return out


def test_default_profiles():
    assert [p.n_segments for p in DEFAULT_PROFILES] == [374, 618, 432]
    assert sum(p.n_segments for p in DEFAULT_PROFILES) * 5 / 60 == pytest.approx(118.67, abs=0.01)
    assert LOW.pause_fraction_range == (0.35, 0.55) and HIGH.syllable_rate_range == (4.0, 6.0)


@pytest.mark.parametrize("kw", [dict(pause_fraction_range=(0.5, 0.5)),
                                dict(pause_fraction_range=(0.2, 1.2)),
                                dict(syllable_rate_range=(0.0, 2.0))])
def test_degenerate_profiles_rejected(kw):
    base = dict(label=FluencyClass.LOW, pause_fraction_range=(0.1, 0.2), syllable_rate_range=(1, 2))
    base.update(kw)
    with pytest.raises(ConfigError):
        ClassProfile(**base)


def test_all_pause():
    x = generate_segment(MID, 0, pause_fraction=1.0)
    assert x.size == 110250
    assert np.abs(x).max() < 1e-4
    assert extract_segment(x, CFG)["rmse"] < 1e-3


@pytest.mark.parametrize("seed", range(8))
def test_no_pause_rmse_lower_bound(seed):
    x = generate_segment(HIGH, seed, pause_fraction=0.0)
    assert rmse_frames(x, CFG).mean() >= 0.3


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), which=st.sampled_from([0, 1, 2]))
def test_segment_invariants(seed, which):
    x, params = generate_segment(DEFAULT_PROFILES[which], seed, return_params=True)
    assert x.size == 110250 and np.all(np.isfinite(x))
    assert np.abs(x).max() == pytest.approx(PEAK_AMPLITUDE, abs=1e-12)
    assert abs(measured_pause_fraction(x) - params["pause_fraction"]) <= 0.05
    # 10 ms ramps bound the step at a boundary to roughly peak / ramp length
    assert np.abs(np.diff(x)).max() < 0.25
    fv = extract_segment(x, CFG)
    assert 0 <= fv["zcr"] <= 1 and 0 <= fv["rmse"] <= 1 and fv["sf"] >= 0


def test_same_seed_same_samples():
    assert np.array_equal(generate_segment(LOW, (1, 2, 3)), generate_segment(LOW, (1, 2, 3)))
    assert not np.array_equal(generate_segment(LOW, 1), generate_segment(LOW, 2))


def test_class_ordering(population):
    rmse = [population[c][0][:, 0].mean() for c in FluencyClass]
    pause = [population[c][1].mean() for c in FluencyClass]
    assert rmse[0] < rmse[1] < rmse[2]
    assert pause[0] > pause[1] > pause[2]


def test_nearest_centroid_holdout(population):
    X = np.concatenate([population[c][0] for c in FluencyClass])
    y = np.repeat([0, 1, 2], 100)
    rng = np.random.default_rng(0)
    perm = rng.permutation(y.size)
    tr, te = perm[:210], perm[210:]
    assert nearest_centroid_accuracy(X[tr], y[tr], X[te], y[te]) >= 0.85


def _hashes(root):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted((root / "wav").iterdir())}


class TestCorpus:
    def test_one_per_class(self, tmp_path):
        m = generate_corpus(tmp_path, n_per_class=(1, 1, 1), seed=5)
        assert len(m) == 3 and len(list((tmp_path / "wav").iterdir())) == 3
        back = load_manifest(tmp_path / "manifest.csv")
        assert [e.label.cls for e in back.entries] == list(FluencyClass)
        assert (tmp_path / "manifest.csv").read_text().count("\n") == 4

    def test_byte_identical_for_seed_and_jobs(self, tmp_path):
        generate_corpus(tmp_path / "a", n_per_class=(3, 2, 2), seed=9, jobs=1)
        generate_corpus(tmp_path / "b", n_per_class=(3, 2, 2), seed=9, jobs=3)
        assert _hashes(tmp_path / "a") == _hashes(tmp_path / "b")
        assert (tmp_path / "a" / "manifest.csv").read_bytes() == (tmp_path / "b" / "manifest.csv").read_bytes()

    def test_prefix_stable_when_counts_grow(self, tmp_path):
        generate_corpus(tmp_path / "a", n_per_class=(1, 1, 1), seed=4)
        generate_corpus(tmp_path / "b", n_per_class=(2, 2, 2), seed=4)
        a, b = _hashes(tmp_path / "a"), _hashes(tmp_path / "b")
        assert all(b[k] == v for k, v in a.items())

    def test_unwritable_directory(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(CorpusError, match="file"):
            generate_corpus(blocker / "out", n_per_class=(1, 1, 1))
