import numpy as np
import pytest
from scipy import ndimage

from persondet.errors import DataError
from persondet.segmentation import (SegmentationParams, region_boxes,
                                    region_sizes, segment)


def test_constant_image_single_region():
    img = np.full((16, 20, 3), 0.4)
    labels = segment(img, SegmentationParams(k=0.5, min_size=5, gaussian_sigma=0.0))
    assert labels.max() == 0
    assert region_sizes(labels).tolist() == [16 * 20]


def test_two_halves_split_by_contrast():
    img = np.zeros((20, 40, 3))
    img[:, 20:] = 1.0
    params = SegmentationParams(k=0.05, min_size=10, gaussian_sigma=0.0)
    labels = segment(img, params)

    # oracle: connected components of the thresholded edge map
    mask_left = np.zeros((20, 40), dtype=bool)
    mask_left[:, :20] = True
    oracle_labels, n = ndimage.label(mask_left)
    assert labels.max() + 1 == 2
    assert n == 1
    # the two regions are exactly the two halves
    boxes = region_boxes(labels)
    assert sorted(boxes.tolist()) == [[0.0, 0.0, 20.0, 20.0], [20.0, 0.0, 40.0, 20.0]]


def test_partition_sizes_sum_to_pixel_count():
    rng = np.random.default_rng(0)
    img = rng.random((24, 18, 3))
    labels = segment(img, SegmentationParams(k=0.3, min_size=4))
    assert region_sizes(labels).sum() == 24 * 18
    assert np.all(region_sizes(labels) > 0)


def test_regions_are_4_connected():
    rng = np.random.default_rng(1)
    img = rng.random((20, 20, 3))
    labels = segment(img, SegmentationParams(k=0.2, min_size=3))
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    for lab in range(labels.max() + 1):
        _, n = ndimage.label(labels == lab, structure=structure)
        assert n == 1, f"region {lab} is disconnected"


def test_min_size_enforced():
    rng = np.random.default_rng(2)
    img = rng.random((30, 30, 3))
    labels = segment(img, SegmentationParams(k=0.1, min_size=25))
    assert region_sizes(labels).min() >= 25


def test_deterministic():
    rng = np.random.default_rng(3)
    img = rng.random((16, 16, 3))
    params = SegmentationParams(k=0.3, min_size=4)
    assert np.array_equal(segment(img, params), segment(img, params))


def test_rejects_bad_images():
    with pytest.raises(DataError):
        segment(np.zeros((4, 4)))
    with pytest.raises(DataError):
        segment(np.zeros((0, 4, 3)))


def test_params_validation():
    with pytest.raises(ValueError):
        SegmentationParams(k=0)
    with pytest.raises(ValueError):
        SegmentationParams(min_size=0)
    with pytest.raises(ValueError):
        SegmentationParams(gaussian_sigma=-1)
