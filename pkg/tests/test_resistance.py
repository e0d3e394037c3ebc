"""Effective resistance, compatibility, harmonic extension, diameters."""

import math

import numpy as np
import pytest

from hanoispec.assembly import Pencil, assemble_decoupled, assemble_neumann
from hanoispec.errors import LevelError, PencilSizeError
from hanoispec.geometry import build_graph, cell_corner_ids, enumerate_words
from hanoispec.resistance import (
    GroundedSolver,
    cell_diameter_scaling,
    compatibility_check,
    effective_resistance,
    harmonic_extension,
    resistance_diameter,
)
from hanoispec.sequences import constant, geometric_to_limit, scale_factors

SEQ = constant(0.5)


class TestEffectiveResistance:
    def test_triangle_pair(self):
        p = assemble_neumann(build_graph(SEQ, 0, 1, 0.25))
        assert effective_resistance(p, 0, 1) == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_m1_boundary_pair_matches_triangle(self):
        g = build_graph(SEQ, 1, 1, 0.25)
        p = assemble_neumann(g)
        ids = cell_corner_ids(g, "")
        # independent dense oracle via pseudo-inverse
        L = p.L.toarray()
        K = np.linalg.pinv(L)
        for a, b in ((0, 1), (0, 2), (1, 2)):
            oracle = K[ids[a], ids[a]] + K[ids[b], ids[b]] - 2 * K[ids[a], ids[b]]
            fast = effective_resistance(p, ids[a], ids[b])
            assert fast == pytest.approx(oracle, rel=1e-10)
            assert fast == pytest.approx(2.0 / 3.0, rel=1e-10)

    def test_isolated_bridge_is_series(self):
        # a split-off bridge is s resistors of gamma/s in series
        g = build_graph(SEQ, 2, 4, 0.25)
        comps = assemble_decoupled(g, 2, "neumann_split")
        path = next(c for c in comps if "edge" in c.boundary.component)
        r = effective_resistance(path, 0, path.n - 1)
        assert r == pytest.approx(float(g.gamma[0]), rel=1e-12)

    def test_metric_properties(self):
        g = build_graph(SEQ, 2, 2, 0.25)
        p = assemble_neumann(g)
        solver = GroundedSolver(p)
        rng = np.random.default_rng(11)
        for _ in range(100):
            u, v, w = rng.choice(p.n, size=3, replace=False)
            ruv = solver.pair_resistance(int(u), int(v))
            rvu = solver.pair_resistance(int(v), int(u))
            assert ruv == pytest.approx(rvu, rel=1e-10)
            ruw = solver.pair_resistance(int(u), int(w))
            rvw = solver.pair_resistance(int(v), int(w))
            assert ruw <= ruv + rvw + 1e-10


class TestCompatibility:
    def test_constant_half_levels(self):
        rep = compatibility_check(SEQ, 4)
        assert rep.ok
        assert rep.max_deviation <= 1e-9

    def test_m0_trivial(self):
        rep = compatibility_check(SEQ, 0)
        assert rep.resistances[0] == pytest.approx((2 / 3, 2 / 3, 2 / 3), rel=1e-12)

    def test_perturbed_rho_fails(self):
        # violating the matching equation by hand must break the equivalence
        g = build_graph(SEQ, 1, 1, 0.25)
        bad_edges = [
            type(e)(e.u, e.v, 0.2 if e.kind == "line" else e.resistance, e.kind, e.level)
            for e in g.edges
        ]
        g.edges[:] = bad_edges
        p = assemble_neumann(g)
        ids = cell_corner_ids(g, "")
        r = effective_resistance(p, ids[0], ids[1])
        assert abs(r - 2.0 / 3.0) > 1e-3

    def test_level_invariance_all_families(self):
        for seq in (constant(1 / 3), constant(0.45), geometric_to_limit(0.6, 0.5)):
            rep = compatibility_check(seq, 3)
            assert rep.max_deviation <= 1e-9

    def test_refinement_preserves_shared_pair_resistances(self):
        # matching pairs make each refined cell trace-equivalent to its
        # coarse triangle, so resistances between vertices present at level
        # j are invariant under building deeper graphs, not only on V_0
        values = []
        for m in (1, 2, 3):
            g = build_graph(SEQ, m, 1, 0.25)
            solver = GroundedSolver(assemble_neumann(g))
            ids = cell_corner_ids(g, "1")
            ids0 = cell_corner_ids(g, "")
            values.append(
                (
                    solver.pair_resistance(ids[1], ids[2]),
                    solver.pair_resistance(ids0[0], ids[1]),
                )
            )
        for later in values[1:]:
            assert later[0] == pytest.approx(values[0][0], rel=1e-10)
            assert later[1] == pytest.approx(values[0][1], rel=1e-10)


class TestHarmonicExtension:
    def test_duality_with_resistance(self):
        g = build_graph(SEQ, 2, 1, 0.25)
        p = assemble_neumann(g)
        ids = cell_corner_ids(g, "")
        ext = harmonic_extension(p, {ids[0]: 1.0, ids[1]: 0.0})
        r = effective_resistance(p, ids[0], ids[1])
        assert ext.energy == pytest.approx(1.0 / r, rel=1e-10)

    def test_constant_data(self):
        g = build_graph(SEQ, 1, 2, 0.25)
        p = assemble_neumann(g)
        ids = cell_corner_ids(g, "")
        ext = harmonic_extension(p, {v: 2.5 for v in ids})
        np.testing.assert_allclose(ext.values, 2.5, atol=1e-12)
        assert ext.energy == pytest.approx(0.0, abs=1e-12)

    def test_minimizing_property(self):
        g = build_graph(SEQ, 1, 2, 0.25)
        p = assemble_neumann(g)
        ext = harmonic_extension(p, {0: 1.0, 4: 0.0})
        rng = np.random.default_rng(3)
        for _ in range(10):
            pert = ext.values.copy()
            noise = rng.normal(scale=1e-3, size=p.n)
            noise[[0, 4]] = 0.0
            pert += noise
            assert float(pert @ p.L.dot(pert)) >= ext.energy - 1e-15

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_block_indicator_energy_bound(self, m):
        # 1 on one m-cell's corners and its adjoining vertices, 0 on all other
        # level-m block corners, harmonic elsewhere: energy at most 6/delta_m
        seq = SEQ
        g = build_graph(seq, m + 1, 1, 0.25)
        p = assemble_neumann(g)
        target = enumerate_words(m)[0]
        fixed = {}
        for w in enumerate_words(m):
            for v in cell_corner_ids(g, w):
                fixed[v] = 0.0
        block = set()
        for v in cell_corner_ids(g, target):
            block.add(v)
            fixed[v] = 1.0
        for lp in g.line_paths:
            ends = {lp.nodes[0], lp.nodes[-1]}
            if ends & block:
                for v in ends:
                    fixed[v] = 1.0
        ext = harmonic_extension(p, fixed)
        delta_m = scale_factors(seq, m).delta[m]
        assert ext.energy <= 6.0 / delta_m + 1e-9


class TestDiameter:
    def test_m0_exact(self):
        p = assemble_neumann(build_graph(SEQ, 0, 1, 0.25))
        res = resistance_diameter(p, mode="exact")
        assert res.value == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_sampled_below_exact(self):
        g = build_graph(SEQ, 2, 1, 0.25)
        p = assemble_neumann(g)
        exact = resistance_diameter(p, mode="exact")
        sampled = resistance_diameter(
            p, mode="sampled", k=40, anchors=list(cell_corner_ids(g, ""))
        )
        assert sampled.value <= exact.value * (1 + 1e-10)
        assert exact.value >= 2.0 / 3.0 - 1e-12

    def test_deterministic(self):
        p = assemble_neumann(build_graph(SEQ, 2, 1, 0.25))
        a = resistance_diameter(p, mode="sampled", k=25)
        b = resistance_diameter(p, mode="sampled", k=25)
        assert a.value == b.value

    def test_exact_size_guard(self):
        p = assemble_neumann(build_graph(SEQ, 7, 1, 0.25))
        with pytest.raises(PencilSizeError):
            resistance_diameter(p, mode="exact")


class TestDiameterScaling:
    def test_constant_half_small(self):
        ds = cell_diameter_scaling(SEQ, 4, 2)
        assert ds.max_diameter[0] == pytest.approx(2.0 / 3.0, rel=1e-9)
        # consecutive ratios near r = 1/2
        for j in range(2):
            ratio = ds.max_diameter[j + 1] / ds.max_diameter[j]
            assert 0.3 <= ratio <= 0.7
        assert ds.dimension_estimate == pytest.approx(
            math.log(3) / math.log(2), rel=0.10
        )
        assert ds.slope == ds.slope_raw  # no drift for constant families

    def test_level_guard(self):
        with pytest.raises(LevelError):
            cell_diameter_scaling(SEQ, 3, 3)

    def test_records_cover_all_blocks(self):
        ds = cell_diameter_scaling(SEQ, 3, 2)
        assert len(ds.records) == 1 + 3 + 9
