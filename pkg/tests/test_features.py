import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repbench.corpus import Manifest, Utterance
from repbench.features import (CacheFormatError, CacheIndex, CacheWriter,
                               FbankParams, FeatureRecord, HEADER_BYTES,
                               LOG_FLOOR, decode_record, encode_record,
                               estimate_storage, extract_fbank, frame_count,
                               layernorm_frames, pool_record, read_record)


def test_frame_count_oracle_one_second():
    # floor((16000 - 400) / 160) + 1
    assert frame_count(16000, 400, 160) == 98
    rec = extract_fbank(np.random.default_rng(0).standard_normal(16000) * 0.1, 16000)
    assert rec.num_frames == 98
    assert rec.num_layers == 1
    assert rec.dim == 40


def test_waveform_shorter_than_window_rejected():
    with pytest.raises(ValueError, match="shorter"):
        extract_fbank(np.zeros(300), 16000)


def test_silence_gives_constant_log_floor_frames():
    rec = extract_fbank(np.zeros(16000), 16000, FbankParams(cmvn=False))
    data = rec.data[0]
    assert np.allclose(data, math.log(LOG_FLOOR), atol=1e-5)
    assert np.all(data == data[0])  # every frame identical


def test_cmvn_standardizes_per_dimension(rng):
    wave = rng.standard_normal(32000) * 0.2
    rec = extract_fbank(wave, 16000, FbankParams(cmvn=True))
    feats = rec.data[0].astype(np.float64)
    assert np.max(np.abs(feats.mean(axis=0))) < 1e-5
    assert np.max(np.abs(feats.var(axis=0) - 1.0)) < 1e-4


# -- binary store ------------------------------------------------------------

@st.composite
def records(draw):
    L = draw(st.integers(1, 4))
    T = draw(st.integers(1, 24))
    D = draw(st.integers(1, 16))
    flat = draw(st.lists(st.floats(-1e6, 1e6, allow_nan=False, width=32),
                         min_size=L * T * D, max_size=L * T * D))
    data = np.array(flat, dtype=np.float32).reshape(L, T, D)
    return FeatureRecord(draw(st.text(min_size=1, max_size=8)), data)


@settings(max_examples=50, deadline=None)
@given(records())
def test_encode_decode_round_trip_bit_exact(record):
    blob = encode_record(record)
    back = decode_record(blob, record.utt_id)
    assert back.data.tobytes() == record.data.tobytes()
    assert back.data.shape == record.data.shape


def test_cache_write_read_round_trip(tmp_path, rng):
    recs = [FeatureRecord(f"u{i}", rng.standard_normal((2, 5, 3)).astype(np.float32))
            for i in range(4)]
    with CacheWriter(tmp_path / "data.bin") as w:
        for r in recs:
            w.write_record(r)
        index = w.index
    index.save(tmp_path / "index.jsonl")
    index2 = CacheIndex.load(tmp_path / "index.jsonl")
    assert index2.total_bytes == index.total_bytes
    for r in recs:
        back = read_record(index2, r.utt_id, tmp_path)
        assert back.data.tobytes() == r.data.tobytes()


def test_read_absent_id_not_found(tmp_path, rng):
    with CacheWriter(tmp_path / "data.bin") as w:
        w.write_record(FeatureRecord("u0", rng.standard_normal((1, 2, 2)).astype(np.float32)))
        index = w.index
    with pytest.raises(KeyError, match="nope"):
        read_record(index, "nope", tmp_path)


def test_wrong_magic_rejected(rng):
    blob = encode_record(FeatureRecord("u", rng.standard_normal((1, 2, 2)).astype(np.float32)))
    bad = b"XXXX" + blob[4:]
    with pytest.raises(CacheFormatError, match="magic"):
        decode_record(bad)


def test_truncated_payload_rejected(rng):
    blob = encode_record(FeatureRecord("u", rng.standard_normal((1, 4, 4)).astype(np.float32)))
    with pytest.raises(CacheFormatError, match="truncated"):
        decode_record(blob[:-3])


def test_non_finite_record_rejected():
    data = np.zeros((1, 2, 2), dtype=np.float32)
    data[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        FeatureRecord("u", data)


# -- pooling -----------------------------------------------------------------

def test_pool_single_frame_equals_normalized_frame(rng):
    rec = FeatureRecord("u", rng.standard_normal((2, 1, 6)).astype(np.float32))
    pooled = pool_record(rec, normalize=True)
    expected = layernorm_frames(rec.data.astype(np.float64))[:, 0, :]
    assert np.allclose(pooled.data, expected, atol=1e-6)


def test_pool_identical_frames_equals_that_frame(rng):
    frame = rng.standard_normal((1, 1, 8)).astype(np.float32)
    rec = FeatureRecord("u", np.repeat(frame, 5, axis=1))
    pooled = pool_record(rec, normalize=False)
    assert np.allclose(pooled.data[0], frame[0, 0], atol=1e-7)


def test_pool_matches_two_loop_mean(rng):
    rec = FeatureRecord("u", rng.standard_normal((2, 3, 4)).astype(np.float32))
    pooled = pool_record(rec, normalize=False)
    # Oracle: naive two-loop summation.
    for layer in range(2):
        for d in range(4):
            acc = 0.0
            for t in range(3):
                acc += float(rec.data[layer, t, d])
            assert pooled.data[layer, d] == pytest.approx(acc / 3.0, abs=1e-7)


def test_pooled_record_matches_invariant_definition(rng):
    rec = FeatureRecord("u", rng.standard_normal((3, 7, 5)).astype(np.float32))
    pooled = pool_record(rec, normalize=True)
    manual = layernorm_frames(rec.data.astype(np.float64)).mean(axis=1)
    assert np.max(np.abs(pooled.data - manual)) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(-8.0, 8.0, allow_nan=False).filter(lambda a: abs(a) > 1e-3))
def test_pool_linear_without_normalization(a):
    rng = np.random.default_rng(7)
    data = rng.standard_normal((2, 4, 3)).astype(np.float32)
    base = pool_record(FeatureRecord("u", data), normalize=False)
    scaled = pool_record(FeatureRecord("u", a * data), normalize=False)
    assert np.allclose(scaled.data, a * base.data, rtol=1e-5, atol=1e-6)


# -- storage accounting -------------------------------------------------------

def _manifest_with_frames(t_frames, win=400, hop=160):
    utts = []
    for i, t in enumerate(t_frames):
        n = win + (t - 1) * hop
        utts.append(Utterance(id=f"u{i}", sr=16000, n=n, split="train"))
    return Manifest(utts)


def test_estimate_storage_unpooled_oracle():
    m = _manifest_with_frames([100])
    est = estimate_storage(m, num_layers=25, dim=1024, win=400, hop=160)
    assert est == 10_240_000 + HEADER_BYTES


def test_estimate_storage_pooled_oracle():
    m = _manifest_with_frames([100])
    est = estimate_storage(m, num_layers=25, dim=1024, win=400, hop=160, pooled=True)
    assert est == 102_400 + HEADER_BYTES


def test_estimate_storage_empty_manifest():
    assert estimate_storage(Manifest([]), 4, 8, 400, 160) == 0


def test_estimate_storage_additive_over_concatenation():
    a = _manifest_with_frames([10, 20])
    b = _manifest_with_frames([30])
    both = Manifest(a.utterances + b.utterances)
    args = dict(num_layers=3, dim=8, win=400, hop=160)
    assert estimate_storage(both, **args) == \
        estimate_storage(a, **args) + estimate_storage(b, **args)


def test_pooled_ratio_equals_mean_frame_count():
    frames = [50, 80, 110, 200]
    m = _manifest_with_frames(frames)
    L, D = 4, 32
    unpooled = estimate_storage(m, L, D, 400, 160) - HEADER_BYTES * len(frames)
    pooled = estimate_storage(m, L, D, 400, 160, pooled=True) - HEADER_BYTES * len(frames)
    ratio = unpooled / pooled
    assert ratio == pytest.approx(np.mean(frames), rel=1e-2)
