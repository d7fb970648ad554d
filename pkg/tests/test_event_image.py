"""Event windows and the 4-channel image representation."""

import numpy as np
import pytest

from evflow import (DataError, EventStream, encode, event_mask,
                    read_event_image_raw, slice_window, write_event_image_raw)
from evflow.event_image import EventWindow, event_image_to_pgm_channels
from conftest import random_stream


def stream_of(width, height, rows):
    xs, ys, ts, ps = zip(*rows) if rows else ((), (), (), ())
    return EventStream(width, height, np.array(xs), np.array(ys), np.array(ts), np.array(ps))


class TestSliceWindow:
    def test_half_open_interval(self):
        s = stream_of(4, 4, [(0, 0, 5, 1), (1, 1, 10, 1), (2, 2, 15, 1)])
        window = slice_window(s, 5, 15)
        assert window.t.tolist() == [5, 10]

    def test_empty_stream(self):
        window = slice_window(stream_of(4, 4, []), 0, 10)
        assert len(window) == 0

    def test_window_before_events(self):
        s = stream_of(4, 4, [(0, 0, 5, 1), (1, 1, 10, 1)])
        assert len(slice_window(s, 0, 5)) == 0

    def test_invalid_bounds(self):
        with pytest.raises(DataError):
            slice_window(stream_of(4, 4, []), 10, 10)

    def test_order_preserved(self, rng):
        s = random_stream(rng, n=40)
        window = slice_window(s, 100, 900)
        assert np.all(np.diff(window.t) >= 0)


class TestEncode:
    def test_empty_window_all_zero(self):
        image = encode(slice_window(stream_of(4, 4, []), 0, 100))
        for channel in image.channels():
            assert not channel.any()

    def test_two_positive_events_counts_and_latest(self):
        # Hand enumeration: window of 1 s, positive events at 0.25 s and
        # 0.75 s on pixel (1, 1) -> count 2, normalized latest 0.75.
        s = stream_of(4, 4, [(1, 1, 250_000, 1), (1, 1, 750_000, 1)])
        image = encode(slice_window(s, 0, 1_000_000))
        assert image.count_pos[1, 1] == 2
        assert image.ts_pos[1, 1] == 0.75
        assert image.count_neg[1, 1] == 0 and image.ts_neg[1, 1] == 0.0
        assert image.count_pos.sum() == 2

    def test_negative_event_normalization(self):
        s = stream_of(2, 2, [(0, 0, 500_000, -1)])
        image = encode(slice_window(s, 0, 2_000_000))
        assert image.count_neg[0, 0] == 1
        assert image.ts_neg[0, 0] == 0.25
        assert image.ts_pos[0, 0] == 0.0

    def test_permutation_invariance_bit_exact(self, rng):
        for _ in range(20):
            s = random_stream(rng, n=int(rng.integers(1, 50)))
            image = encode(slice_window(s, 0, 1000))
            order = rng.permutation(len(s))
            resorted = sorted((s.event(i) for i in order), key=lambda e: e.t)
            image2 = encode(slice_window(
                EventStream.from_events(s.width, s.height, resorted), 0, 1000))
            for a, b in zip(image.channels(), image2.channels()):
                assert np.array_equal(a, b)

    def test_count_total_equals_window_size(self, rng):
        for _ in range(20):
            s = random_stream(rng, n=int(rng.integers(0, 60)))
            window = slice_window(s, 200, 800)
            image = encode(window)
            assert image.count_pos.sum() + image.count_neg.sum() == len(window)

    def test_normalization_scale_invariance(self, rng):
        s = random_stream(rng, n=25, t_max=999)
        image = encode(slice_window(s, 0, 1000))
        doubled = EventStream(s.width, s.height, s.x, s.y, s.t * 2, s.p)
        image2 = encode(slice_window(doubled, 0, 2000))
        assert np.array_equal(image.ts_pos, image2.ts_pos)
        assert np.array_equal(image.ts_neg, image2.ts_neg)

    def test_ts_maximum_matches_latest_event(self, rng):
        for _ in range(20):
            s = random_stream(rng, n=int(rng.integers(1, 40)))
            window = slice_window(s, 0, 1000)
            if len(window) == 0:
                continue
            image = encode(window)
            for channel, sign in ((image.ts_pos, 1), (image.ts_neg, -1)):
                times = window.t[window.p == sign]
                if times.size:
                    expected = (times.max() - window.t_start) / window.duration
                    assert channel.max() == expected
                    assert channel.max() < 1.0
                else:
                    assert channel.max() == 0.0

    def test_window_membership_validated(self):
        with pytest.raises(DataError):
            EventWindow(4, 4, 0, 10, np.array([1]), np.array([1]),
                        np.array([10]), np.array([1]))


class TestEventMask:
    def test_empty_window(self):
        assert not event_mask(slice_window(stream_of(4, 4, []), 0, 10)).any()

    def test_single_event(self):
        mask = event_mask(slice_window(stream_of(4, 4, [(2, 3, 5, 1)]), 0, 10))
        assert mask[3, 2]
        assert mask.sum() == 1

    def test_both_polarities_once(self):
        s = stream_of(4, 4, [(1, 1, 3, 1), (1, 1, 4, -1)])
        assert event_mask(slice_window(s, 0, 10)).sum() == 1


class TestSerialization:
    def test_raw_roundtrip_lossless(self, rng):
        s = random_stream(rng, n=30)
        image = encode(slice_window(s, 0, 1000))
        back, t0, t1 = read_event_image_raw(write_event_image_raw(image, 0, 1000))
        assert (t0, t1) == (0, 1000)
        for a, b in zip(image.channels(), back.channels()):
            assert np.array_equal(a, b)

    def test_pgm_channels_quantization(self):
        s = stream_of(2, 1, [(0, 0, 1, 1)] * 300 + [(1, 0, 500, 1)])
        image = encode(slice_window(s, 0, 1000))
        channels = event_image_to_pgm_channels(image)
        assert channels["count_pos"][0, 0] == 255  # clamped from 300
        assert channels["ts_pos"][0, 1] == np.rint(0.5 * 255)
