"""Graph construction: counts, masses, addressing, determinism."""

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from hanoispec.assembly import assemble_neumann
from hanoispec.errors import AddressError, DomainError
from hanoispec.geometry import (
    build_graph,
    cell_corner_ids,
    enumerate_words,
    word_rank,
)
from hanoispec.sequences import constant

SEQ = constant(0.5)


class TestWords:
    def test_level_zero(self):
        assert enumerate_words(0) == [""]

    def test_level_one(self):
        assert enumerate_words(1) == ["1", "2", "3"]

    def test_level_two(self):
        words = enumerate_words(2)
        assert len(words) == 9
        assert words[0] == "11"
        assert words[-1] == "33"
        assert words == sorted(words)

    def test_rank_roundtrip(self):
        for i, w in enumerate(enumerate_words(3)):
            assert word_rank(w) == i

    def test_bad_letter(self):
        with pytest.raises(AddressError):
            word_rank("14")


class TestCounts:
    @pytest.mark.parametrize("m", range(0, 7))
    @pytest.mark.parametrize("s", range(1, 5))
    def test_vertex_edge_formulas(self, m, s):
        g = build_graph(SEQ, m, s, 0.25)
        assert g.n_vertices == 3 ** (m + 1) + (s - 1) * (3 ** (m + 1) - 3) // 2
        assert g.n_edges == 3 ** (m + 1) + s * (3 ** (m + 1) - 3) // 2

    def test_m2_s2_example(self):
        g = build_graph(SEQ, 2, 2, 0.25)
        assert g.n_vertices == 39
        assert g.n_edges == 51

    def test_m0_unit_triangle(self):
        g = build_graph(SEQ, 0, 1, 0.25)
        assert g.n_vertices == 3
        assert g.n_edges == 3
        assert all(e.resistance == 1.0 for e in g.edges)
        assert np.allclose(g.masses, 1.0 / 3.0)

    @pytest.mark.parametrize("m,s", [(0, 1), (1, 1), (2, 2), (3, 1), (4, 2)])
    def test_connected(self, m, s):
        g = build_graph(SEQ, m, s, 0.25)
        p = assemble_neumann(g)
        ncomp, _ = connected_components(p.L, directed=False)
        assert ncomp == 1


class TestResistancesAndMasses:
    def test_m1_s1_example(self):
        g = build_graph(SEQ, 1, 1, 0.25)
        cell = [e for e in g.edges if e.kind == "cell"]
        line = [e for e in g.edges if e.kind == "line"]
        assert len(cell) == 9 and len(line) == 3
        assert all(e.resistance == pytest.approx(0.5) for e in cell)
        assert all(e.resistance == pytest.approx(1.0 / 6.0, rel=1e-14) for e in line)
        # each cell mass (1/3 + 1/4)/2 = 7/24, each bridge mass 1/24
        for w in enumerate_words(1):
            ids = [g.corner_id(w, i) for i in (1, 2, 3)]
            assert g.mass_cell[ids].sum() == pytest.approx(7.0 / 24.0, rel=1e-14)
        for lp in g.line_paths:
            assert lp.mass == pytest.approx(1.0 / 24.0, rel=1e-14)
        assert g.masses.sum() == pytest.approx(1.0, abs=1e-12)

    def test_every_level_resistance(self):
        g = build_graph(SEQ, 3, 2, 0.25)
        for e in g.edges:
            if e.kind == "cell":
                assert e.resistance == pytest.approx(float(g.delta[3]), rel=1e-14)
            else:
                assert e.resistance == pytest.approx(
                    float(g.gamma[e.level - 1]) / g.s, rel=1e-14
                )

    @pytest.mark.parametrize("beta", [0.05, 0.25, 0.33])
    @pytest.mark.parametrize("m,s", [(2, 1), (3, 2), (4, 1)])
    def test_mass_conservation(self, beta, m, s):
        g = build_graph(SEQ, m, s, beta)
        assert g.masses.sum() == pytest.approx(1.0, abs=1e-12)

    def test_per_cell_mass(self):
        g = build_graph(SEQ, 3, 2, 0.25)
        mu = 0.5 * (3.0 ** -3 + 0.25 ** 3)
        for w in enumerate_words(3):
            ids = [g.corner_id(w, i) for i in (1, 2, 3)]
            assert g.mass_cell[ids].sum() == pytest.approx(mu, rel=1e-13)

    def test_block_aggregate_mass(self):
        # cells plus interior bridges of block w must carry (3^-j + beta^j)/2
        beta = 0.25
        g = build_graph(SEQ, 4, 2, beta)
        for j in (1, 2, 3):
            for w in enumerate_words(j)[:4]:
                total = 0.0
                for cw in enumerate_words(4):
                    if cw.startswith(w):
                        ids = [g.corner_id(cw, i) for i in (1, 2, 3)]
                        total += float(g.mass_cell[ids].sum())
                for lp in g.line_paths:
                    if lp.level > j and lp.word.startswith(w):
                        total += lp.mass
                assert total == pytest.approx(0.5 * (3.0 ** -j + beta ** j), rel=1e-12)

    @pytest.mark.parametrize("beta", [0.05, 0.25, 0.33])
    def test_measure_bounds_all_levels(self, beta):
        for j in range(0, 7):
            mu = 0.5 * (3.0 ** -j + beta ** j)
            assert beta ** j <= mu * (1 + 1e-15)
            assert mu <= 3.0 ** -j * (1 + 1e-15)

    def test_beta_domain_error(self):
        with pytest.raises(DomainError) as exc:
            build_graph(SEQ, 1, 1, 0.4)
        assert "(0, 1/3)" in str(exc.value)
        with pytest.raises(DomainError):
            build_graph(SEQ, 1, 1, 1.0 / 3.0)


class TestAddressing:
    def test_cell_corner_ids_full_length(self):
        g = build_graph(SEQ, 1, 1, 0.25)
        ids = cell_corner_ids(g, "2")
        assert ids == (g.corner_id("2", 1), g.corner_id("2", 2), g.corner_id("2", 3))

    def test_block_corners_level_one_of_two(self):
        g = build_graph(SEQ, 2, 1, 0.25)
        ids = cell_corner_ids(g, "1")
        assert ids == (
            g.corner_id("11", 1),
            g.corner_id("12", 2),
            g.corner_id("13", 3),
        )

    def test_v0_corners(self):
        g = build_graph(SEQ, 2, 1, 0.25)
        ids = cell_corner_ids(g, "")
        assert ids == (
            g.corner_id("11", 1),
            g.corner_id("22", 2),
            g.corner_id("33", 3),
        )

    def test_bad_word(self):
        g = build_graph(SEQ, 2, 1, 0.25)
        with pytest.raises(AddressError):
            cell_corner_ids(g, "4")


GOLDEN_M1_S2 = """\
V 0 corner 1 1 0.09722222222222221
V 1 corner 1 2 0.10763888888888887
V 2 corner 1 3 0.10763888888888887
V 3 corner 2 1 0.10763888888888887
V 4 corner 2 2 0.09722222222222221
V 5 corner 2 3 0.10763888888888887
V 6 corner 3 1 0.10763888888888887
V 7 corner 3 2 0.10763888888888887
V 8 corner 3 3 0.09722222222222221
V 9 line - 1@1 0.020833333333333329
V 10 line - 2@1 0.020833333333333329
V 11 line - 3@1 0.020833333333333329
E 0 1 0.5 cell 1
E 0 2 0.5 cell 1
E 1 2 0.5 cell 1
E 3 4 0.5 cell 1
E 3 5 0.5 cell 1
E 4 5 0.5 cell 1
E 6 7 0.5 cell 1
E 6 8 0.5 cell 1
E 7 8 0.5 cell 1
E 5 9 0.083333333333333315 line 1
E 9 7 0.083333333333333315 line 1
E 2 10 0.083333333333333315 line 1
E 10 6 0.083333333333333315 line 1
E 1 11 0.083333333333333315 line 1
E 11 3 0.083333333333333315 line 1
"""


class TestDeterminism:
    def test_golden_dump(self):
        g = build_graph(SEQ, 1, 2, 0.25)
        assert g.dump_text() == GOLDEN_M1_S2

    def test_rebuild_identical(self):
        a = build_graph(SEQ, 3, 2, 0.25).dump_text()
        b = build_graph(SEQ, 3, 2, 0.25).dump_text()
        assert a == b

    def test_coords_present_with_alpha(self):
        g = build_graph(SEQ, 1, 2, 0.25, alpha=0.5)
        assert g.coords is not None
        # V_0 corners sit at the outer triangle corners
        np.testing.assert_allclose(g.coords[g.corner_id("1", 1)], [0.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(g.coords[g.corner_id("2", 2)], [1.0, 0.0], atol=1e-15)
        # interior line nodes sit between their endpoints
        lp = g.line_paths[0]
        mid = 0.5 * (g.coords[lp.nodes[0]] + g.coords[lp.nodes[-1]])
        np.testing.assert_allclose(g.coords[lp.nodes[1]], mid, atol=1e-14)

    def test_dump_includes_coordinates(self):
        g = build_graph(SEQ, 1, 1, 0.25, alpha=0.5)
        lines = g.dump_text().splitlines()
        first = lines[0].split()
        assert first[:5] == ["V", "0", "corner", "1", "1"]
        assert len(first) == 8  # mass plus x and y columns
        assert float(first[6]) == 0.0 and float(first[7]) == 0.0
