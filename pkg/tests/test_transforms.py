import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radialweb.errors import DomainError
from radialweb.radial import ModelParams, build_drpw
from radialweb.streams import RngStream
from radialweb.transforms import (PlanarPath, PlanarPathFamily, densify_segments, family_hausdorff,
                                  lambda_discrepancy, map_lambda, map_psi, map_psi_inv, map_T,
                                  map_T_inv, path_distance, planar_hausdorff, rescale_diffusive,
                                  rescale_points)


def const(x, a=-1.0, b=-0.5, sigma=None):
    return PlanarPath(a if sigma is None else sigma, [a if sigma is None else sigma, b], [x, x])


def test_rescale_points():
    n = 10 ** 4
    assert np.allclose(rescale_points([math.sqrt(n), -n], n), [1, -1])
    assert np.allclose(rescale_points([3.7, -5000], n), [0.037, -0.5])
    assert np.allclose(rescale_points([3.7, -5000], 1), [3.7, -5000])


def test_rescale_family_maps_strip():
    p = ModelParams(100, 0.5, 0.3, 0.1)
    fam = build_drpw(p, RngStream(3))
    from radialweb.radial import restrict_family
    out = rescale_diffusive(restrict_family(fam), 100)
    assert out.strip == (-1.0, -0.5)
    for q in out:
        assert q.times[0] >= -1 - 1e-12 and q.times[-1] <= -0.5 + 1e-12
    with pytest.raises(DomainError):
        rescale_diffusive(out, 0)


def test_map_lambda():
    assert np.allclose(map_lambda([0, -5]), [0, -5])
    z = 2 * np.array([math.sin(0.3), -math.cos(0.3)])
    assert np.allclose(map_lambda(z), [0.6, -2])
    with pytest.raises(DomainError):
        map_lambda([1.0, 0.0])


@settings(max_examples=60)
@given(r=st.floats(0.1, 100), a=st.floats(-1.5, 1.5), dr=st.floats(0.01, 5))
def test_lambda_orders_heights_and_inverts(r, a, dr):
    z1 = r * np.array([math.sin(a), -math.cos(a)])
    z2 = (r + dr) * np.array([math.sin(a), -math.cos(a)])
    l1, l2 = map_lambda(z1), map_lambda(z2)
    assert l2[1] < l1[1]
    # polar representation is recovered from the image
    assert l1[0] / -l1[1] == pytest.approx(a, abs=1e-12)


def test_psi_examples():
    assert np.allclose(map_psi(1, -1), (1, 0))
    assert np.allclose(map_psi(2, -2), (1, -0.5))
    assert np.allclose(map_psi_inv(1, -0.5), (2, -2))
    with pytest.raises(DomainError):
        map_psi(1, 0)
    with pytest.raises(DomainError):
        map_psi_inv(1, -1)


def test_psi_round_trip():
    rng = np.random.default_rng(0)
    x = rng.normal(size=10 ** 4) * 5
    t = -rng.uniform(0.05, 1, size=10 ** 4)
    xp, tp = map_psi(x, t)
    x2, t2 = map_psi_inv(xp, tp)
    assert np.max(np.abs(x2 - x) / np.maximum(1, np.abs(x))) < 1e-12
    assert np.max(np.abs(t2 - t)) < 1e-12
    x3, t3 = map_psi(*map_psi_inv(xp, tp))
    assert np.max(np.abs(x3 - xp) / np.maximum(1, np.abs(xp))) < 1e-12


def test_T_examples():
    fam = PlanarPathFamily((-1.0, -0.5), [const(0.0), PlanarPath(-1.0, [-1, -0.5], [1, 0.5])])
    out = map_T(fam)
    assert out.strip == (0.0, 1.0)
    assert np.allclose(out.paths[0].positions, 0)
    assert np.allclose(out.paths[1].positions, 1)
    with pytest.raises(DomainError):
        map_T(PlanarPathFamily((-2.0, -0.5), []))


def test_T_round_trip_converges_with_resolution():
    rng = np.random.default_rng(1)
    t = np.linspace(-1, -0.5, 9)
    paths = [PlanarPath(-1.0, t, np.cumsum(rng.normal(size=9)) * 0.1) for _ in range(5)]
    fam = PlanarPathFamily((-1.0, -0.5), paths)
    errs = []
    for res in (64, 256, 1024):
        back = map_T_inv(map_T(fam, res), res)
        errs.append(max(np.max(np.abs(b(t) - p(t))) for b, p in zip(back, fam)))
    assert errs[2] < errs[0]
    assert errs[2] < 1e-2


def test_path_distance_examples():
    a = const(0.0, 0.0, 1.0)
    b = const(1.0, 0.0, 1.0)
    assert path_distance(a, a, (0, 1)) == 0
    assert path_distance(a, b, (0, 1)) == pytest.approx(math.tanh(1.0))
    c = PlanarPath(0.5, [0.5, 1.0], [0.0, 0.0])
    assert path_distance(a, c, (0, 1)) >= math.tanh(0.5) - 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_path_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    ps = []
    for _ in range(3):
        s = rng.uniform(0, 0.5)
        t = np.sort(np.concatenate([[s], rng.uniform(s, 1, 4)]))
        t = np.unique(t)
        ps.append(PlanarPath(s, t, rng.normal(size=len(t))))
    d = lambda u, v: path_distance(u, v, (0, 1))
    assert d(ps[0], ps[1]) == pytest.approx(d(ps[1], ps[0]), abs=1e-15)
    assert d(ps[0], ps[2]) <= d(ps[0], ps[1]) + d(ps[1], ps[2]) + 1e-9


def test_family_hausdorff():
    a, b = const(0.0, 0.0, 1.0), const(1.0, 0.0, 1.0)
    K = PlanarPathFamily((0.0, 1.0), [a, b])
    assert family_hausdorff(K, K) == 0
    single = PlanarPathFamily((0.0, 1.0), [a])
    assert family_hausdorff(single, PlanarPathFamily((0.0, 1.0), [b])) == path_distance(a, b, (0, 1))
    # 2x1 matrix: sup over K1 of inf over K2 is d(b, a)
    assert family_hausdorff(K, single) == pytest.approx(path_distance(b, a, (0, 1)))
    with pytest.raises(DomainError):
        family_hausdorff(K, PlanarPathFamily((0.0, 1.0), []))


def test_planar_hausdorff():
    assert planar_hausdorff([[0, 0]], [[3, 4]]) == 5
    A = np.random.default_rng(2).normal(size=(50, 2))
    assert planar_hausdorff(A, A) == 0
    with pytest.raises(DomainError):
        planar_hausdorff(np.zeros((0, 2)), A)


def test_densify_spacing():
    a = np.array([[0.0, 0.0], [1.0, 1.0]])
    b = np.array([[1.0, 0.0], [1.0, 3.0]])
    pts = densify_segments(a, b, 0.1)
    assert np.any(np.all(np.isclose(pts, [1.0, 3.0]), axis=1))
    on_first = pts[pts[:, 1] == 0]
    assert np.max(np.diff(np.sort(on_first[:, 0]))) <= 0.1 + 1e-12


def test_lambda_discrepancy_small():
    fam = build_drpw(ModelParams(100, 0.5, 0.3, 0.1), RngStream(4))
    assert 0 <= lambda_discrepancy(fam) < 0.05


def test_family_json_round_trip():
    fam = PlanarPathFamily((0.0, 1.0), [PlanarPath(0.1, [0.1, 0.7], [1 / 3, math.pi])])
    back = PlanarPathFamily.from_json(fam.to_json())
    assert back.paths[0].positions[0] == 1 / 3
    assert back.paths[0].positions[1] == math.pi


def test_lambda_discrepancy_matches_plain_hausdorff():
    # pruned search against the plain two-sided Hausdorff of the same clouds
    n = 200
    fam = build_drpw(ModelParams(n, 0.5, 0.3, 0.1), RngStream(5))
    a, b = fam.edges()
    cloud = densify_segments(rescale_points(a, n), rescale_points(b, n), n ** -0.5)
    cloud = cloud[cloud[:, 1] < 0]
    model = np.stack([cloud[:, 0] * math.sqrt(n), cloud[:, 1] * n], axis=-1)
    ref = planar_hausdorff(cloud, rescale_points(map_lambda(model), n))
    assert lambda_discrepancy(fam) == ref
