import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persondet.boxes import (box_area, clip_boxes, decode_bbox, encode_bbox,
                             iou, iou_matrix, validate_box)


def random_box(rng, lo=0.0, hi=100.0):
    x1, x2 = sorted(rng.uniform(lo, hi, 2))
    y1, y2 = sorted(rng.uniform(lo, hi, 2))
    return np.array([x1, y1, x2 + 1e-3, y2 + 1e-3])


def test_iou_identical():
    b = [3.0, 4.0, 10.0, 12.0]
    assert iou(b, b) == 1.0


def test_iou_disjoint():
    assert iou([0, 0, 1, 1], [5, 5, 6, 6]) == 0.0


def test_iou_half_overlap():
    # overlap 50, union 150
    assert iou([0, 0, 10, 10], [5, 0, 15, 10]) == pytest.approx(50 / 150, abs=1e-12)


def test_iou_symmetric_and_bounded_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = random_box(rng), random_box(rng)
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(iou(b, a), abs=0)
        assert iou(a, a) == 1.0


def test_iou_matrix_agrees_with_scalar():
    rng = np.random.default_rng(1)
    a = np.stack([random_box(rng) for _ in range(7)])
    b = np.stack([random_box(rng) for _ in range(5)])
    m = iou_matrix(a, b)
    for i in range(7):
        for j in range(5):
            assert m[i, j] == pytest.approx(iou(a[i], b[j]), abs=1e-12)


def test_encode_self_is_zero():
    p = [2.0, 3.0, 8.0, 11.0]
    assert np.allclose(encode_bbox(p, p), 0.0)


def test_decode_zero_is_identity():
    p = np.array([2.0, 3.0, 8.0, 11.0])
    assert np.allclose(decode_bbox(p, np.zeros(4)), p)


def test_encode_known_shift():
    # pure half-width shift in x
    d = encode_bbox([0, 0, 10, 10], [5, 0, 15, 10])
    assert np.allclose(d, [0.5, 0.0, 0.0, 0.0])


def test_roundtrip_many():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        p, g = random_box(rng), random_box(rng)
        back = decode_bbox(p, encode_bbox(p, g))
        assert np.max(np.abs(back - g)) < 1e-9


@settings(max_examples=200)
@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(-20, 20), st.floats(-20, 20))
def test_roundtrip_property(w, h, x, y):
    p = np.array([x, y, x + w, y + h])
    g = np.array([x + 0.3 * w, y - 0.1 * h, x + 1.7 * w, y + 0.9 * h])
    back = decode_bbox(p, encode_bbox(p, g))
    assert np.max(np.abs(back - g)) < 1e-9 * max(1.0, np.max(np.abs(g)))


def test_validate_rejects_degenerate():
    with pytest.raises(ValueError):
        validate_box([5, 0, 5, 10])
    with pytest.raises(ValueError):
        validate_box([0, 0, 10, float("nan")])


def test_clip_boxes():
    out = clip_boxes([[-5, -5, 50, 50]], 40, 30)
    assert out.tolist() == [[0, 0, 40, 30]]
    assert box_area(out)[0] == 40 * 30
