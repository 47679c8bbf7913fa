import struct

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from seqvo.errors import ParseError
from seqvo.flow import (
    OnTheFlyFlow,
    PrecomputedFlow,
    cache_path,
    compute_flow,
    flow_to_encoder_input,
    load_precomputed_flow,
    resize_flow,
    to_gray,
    write_flow,
)
from seqvo.flow import _backend, _lk_py

from conftest import smooth_texture

HAVE_CYTHON = _backend.BACKEND == "cython"
BACKENDS = ["python"] + (["cython"] if HAVE_CYTHON else [])


def interior(f, m=12):
    return f[m:-m, m:-m]


@pytest.mark.parametrize("backend", BACKENDS)
class TestComputeFlow:
    def test_identical_frames(self, backend):
        a = smooth_texture(64, 80)
        f = compute_flow(a, a, backend=backend)
        assert f.shape == (64, 80, 2) and f.dtype == np.float32
        assert np.abs(f).max() <= 0.1

    @pytest.mark.parametrize("shift", [(3, 0), (0, -2), (-1, 1)])
    def test_wrapped_translation(self, backend, shift):
        a = smooth_texture(96, 128, seed=3)
        u, v = shift
        b = np.roll(a, (v, u), axis=(0, 1))  # b(x + u, y + v) = a(x, y)
        f = compute_flow(a, b, backend=backend)
        med = np.median(interior(f).reshape(-1, 2), axis=0)
        assert abs(med[0] - u) <= 0.5 and abs(med[1] - v) <= 0.5

    def test_deterministic(self, backend):
        a = smooth_texture(48, 64, seed=1)
        b = np.roll(a, 2, axis=1)
        assert np.array_equal(compute_flow(a, b, backend=backend), compute_flow(a, b, backend=backend))

    def test_dimension_mismatch(self, backend):
        with pytest.raises(ValueError):
            compute_flow(np.zeros((10, 12)), np.zeros((10, 13)), backend=backend)

    def test_rgb_rejected(self, backend):
        with pytest.raises(ValueError):
            compute_flow(np.zeros((10, 12, 3)), np.zeros((10, 12, 3)), backend=backend)

    def test_tiny_image(self, backend):
        f = compute_flow(np.zeros((5, 5)), np.zeros((5, 5)), backend=backend)
        assert f.shape == (5, 5, 2) and np.isfinite(f).all()


def lk_step_oracle(a, b, flow, radius, reg):
    """One refinement iteration written as explicit per-pixel loops."""
    H, W = a.shape
    Ix = np.zeros_like(a)
    Iy = np.zeros_like(a)
    for y in range(H):
        for x in range(W):
            Ix[y, x] = 0.5 * (a[y, min(x + 1, W - 1)] - a[y, max(x - 1, 0)])
            Iy[y, x] = 0.5 * (a[min(y + 1, H - 1), x] - a[max(y - 1, 0), x])

    def sample(x, y):
        x = min(max(x, 0.0), W - 1.0)
        y = min(max(y, 0.0), H - 1.0)
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        x1, y1 = min(x0 + 1, W - 1), min(y0 + 1, H - 1)
        fx, fy = x - x0, y - y0
        return ((1 - fy) * ((1 - fx) * b[y0, x0] + fx * b[y0, x1])
                + fy * ((1 - fx) * b[y1, x0] + fx * b[y1, x1]))

    It = np.array([[sample(x + flow[y, x, 0], y + flow[y, x, 1]) - a[y, x] for x in range(W)] for y in range(H)])
    out = flow.copy()
    for y in range(H):
        for x in range(W):
            G = np.zeros((2, 2))
            e = np.zeros(2)
            for yy in range(max(0, y - radius), min(H, y + radius + 1)):
                for xx in range(max(0, x - radius), min(W, x + radius + 1)):
                    g = np.array([Ix[yy, xx], Iy[yy, xx]])
                    G += np.outer(g, g)
                    e += g * It[yy, xx]
            out[y, x] -= np.linalg.solve(G + reg * np.eye(2), e)
    return out


class TestKernels:
    def test_python_kernel_matches_loop_oracle(self, rng):
        a = rng.random((7, 9))
        b = rng.random((7, 9))
        flow = rng.uniform(-1, 1, (7, 9, 2))
        expected = lk_step_oracle(a, b, flow, 2, 1e-3)
        got = _lk_py.lk_refine(a, b, flow.copy(), 2, 1, 1e-3)
        np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-9)

    @pytest.mark.skipif(not HAVE_CYTHON, reason="compiled kernel not built")
    def test_backends_agree(self, rng):
        a = smooth_texture(40, 56, seed=5)
        b = np.roll(a, (1, 2), axis=(0, 1)) + 0.01 * rng.random((40, 56))
        f0 = rng.uniform(-0.5, 0.5, (40, 56, 2))
        py = _backend.get_kernel("python")(a, b, f0.copy(), 4, 5, 1e-4)
        cy = _backend.get_kernel("cython")(a, b, f0.copy(), 4, 5, 1e-4)
        np.testing.assert_allclose(cy, py, rtol=1e-10, atol=1e-10)

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            _backend.get_kernel("fortran")


class TestFlowFiles:
    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float32, st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(2)),
                  elements=st.floats(-1e6, 1e6, width=32)))
    def test_roundtrip_bit_identical(self, tmp_path_factory, flow):
        path = tmp_path_factory.mktemp("f") / "x.vofl"
        write_flow(path, flow)
        back = load_precomputed_flow(path)
        assert back.dtype == np.float32 and back.tobytes() == flow.tobytes()

    def test_zero_flow_4x4(self, tmp_path):
        write_flow(tmp_path / "z.vofl", np.zeros((4, 4, 2), np.float32))
        f = load_precomputed_flow(tmp_path / "z.vofl")
        assert f.shape == (4, 4, 2) and not f.any()

    def _raw(self, path, magic=b"VOFL", w=4, h=4, n=None):
        n = w * h * 2 if n is None else n
        path.write_bytes(struct.pack("<4sII", magic, w, h) + b"\0" * (4 * n))
        return path

    def test_missing(self, tmp_path):
        with pytest.raises(ParseError) as e:
            load_precomputed_flow(tmp_path / "nope.vofl")
        assert e.value.field == "path"

    def test_truncated_payload(self, tmp_path):
        with pytest.raises(ParseError) as e:
            load_precomputed_flow(self._raw(tmp_path / "t.vofl", n=31))
        assert e.value.field == "data"

    def test_truncated_header(self, tmp_path):
        (tmp_path / "h.vofl").write_bytes(b"VOF")
        with pytest.raises(ParseError) as e:
            load_precomputed_flow(tmp_path / "h.vofl")
        assert e.value.field == "header"

    def test_bad_magic(self, tmp_path):
        with pytest.raises(ParseError) as e:
            load_precomputed_flow(self._raw(tmp_path / "m.vofl", magic=b"PIEH"))
        assert e.value.field == "magic"

    def test_dimension_overflow(self, tmp_path):
        with pytest.raises(ParseError) as e:
            load_precomputed_flow(self._raw(tmp_path / "o.vofl", w=1 << 20, n=0))
        assert e.value.field == "width"
        with pytest.raises(ParseError) as e:
            load_precomputed_flow(self._raw(tmp_path / "o2.vofl", h=0, n=0))
        assert e.value.field == "height"


class TestEncoderInput:
    def test_normalization(self):
        f = np.zeros((8, 10, 2), np.float32)
        f[..., 0] = 5.0
        f[..., 1] = -2.0
        t = flow_to_encoder_input(f)
        assert t.shape == (2, 8, 10)
        assert torch.allclose(t[0], torch.full((8, 10), 1.0))
        assert torch.allclose(t[1], torch.full((8, 10), -0.5))

    def test_resize_rescales_displacements(self):
        f = np.zeros((20, 40, 2), np.float32)
        f[..., 0] = 4.0
        f[..., 1] = 2.0
        r = resize_flow(f, (10, 10))
        np.testing.assert_allclose(r[..., 0], 1.0, atol=1e-6)
        np.testing.assert_allclose(r[..., 1], 1.0, atol=1e-6)
        # normalization is resolution invariant for a uniform field
        t0 = flow_to_encoder_input(f)
        t1 = flow_to_encoder_input(f, (10, 10))
        assert torch.allclose(t0.mean((1, 2)), t1.mean((1, 2)), atol=1e-6)


class TestProviders:
    def test_cache_and_precomputed(self, tmp_path):
        a = smooth_texture(32, 40)
        b = np.roll(a, 1, axis=1)
        rgb_a = np.repeat(a[..., None], 3, -1)
        rgb_b = np.repeat(b[..., None], 3, -1)
        prov = OnTheFlyFlow(cache_dir=tmp_path)
        f = prov.flow(("00", 3), rgb_a, rgb_b)
        p = cache_path(tmp_path, ("00", 3))
        assert p.name == "000003.vofl" and p.exists()
        assert np.array_equal(PrecomputedFlow(tmp_path).flow(("00", 3)), f)
        with pytest.raises(ParseError):
            PrecomputedFlow(tmp_path).flow(("00", 4))

    def test_to_gray(self):
        img = np.ones((3, 4, 3)) * np.array([1.0, 0.0, 0.0])
        np.testing.assert_allclose(to_gray(img), 0.299)
        np.testing.assert_allclose(to_gray(np.moveaxis(img, -1, 0)), 0.299)
