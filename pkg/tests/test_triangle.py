import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import xolfreq as xf
from xolfreq.errors import (
    DimensionMismatch,
    DropExceedsStock,
    DuplicateCell,
    InvalidExposure,
    InvalidTriangleData,
    MalformedCsv,
    MissingCell,
    NegativeCount,
    NonInteger,
    OutOfTriangle,
)

# Published six-year example portfolios: cumulative triangles as printed.
C_A = [
    [5, 9, 11, 12, 13, 11],
    [11, 16, 13, 11, 17],
    [9, 17, 22, 22],
    [10, 10, 11],
    [17, 18],
    [14],
]
C_B = [
    [8, 4, 12, 12, 14, 13],
    [3, 5, 7, 10, 15],
    [5, 10, 11, 9],
    [27, 20, 29],
    [23, 18],
    [14],
]


class TestClaimTriangle:
    def test_from_rows_roundtrip(self):
        tri = xf.ClaimTriangle.from_rows([[1, 2, 3], [4, 5], [6]])
        assert tri.n == 3
        assert tri.row(1) == (1, 2, 3)
        assert tri.column(2) == (2, 5)
        assert tri.latest(2) == 5
        assert tri.to_rows() == [[1, 2, 3], [4, 5], [6]]

    def test_missing_cell_rejected(self):
        with pytest.raises(MissingCell):
            xf.ClaimTriangle(n=2, cells={(1, 1): 1, (2, 1): 2})

    def test_extra_cell_rejected(self):
        with pytest.raises(OutOfTriangle):
            xf.ClaimTriangle(n=2, cells={(1, 1): 1, (1, 2): 2, (2, 1): 3, (2, 2): 4})

    def test_negative_and_non_integer_rejected(self):
        with pytest.raises(NegativeCount):
            xf.ClaimTriangle.from_rows([[1, -2], [3]])
        with pytest.raises(NonInteger):
            xf.ClaimTriangle.from_rows([[1, 2.5], [3]])

    def test_value_outside_triangle(self):
        tri = xf.ClaimTriangle.from_rows([[1, 2], [3]])
        with pytest.raises(OutOfTriangle):
            tri.value(2, 2)


class TestBuildCumulative:
    def test_portfolio_a_matches_published_table(self, portfolio_a):
        assert portfolio_a.C.to_rows() == C_A

    def test_portfolio_b_matches_published_table(self, portfolio_b):
        assert portfolio_b.C.to_rows() == C_B

    def test_first_row_recursion(self, portfolio_a):
        # N = (5,4,5,2,1,0), D = (0,0,3,1,0,2) -> C = (5,9,11,12,13,11)
        assert portfolio_a.C.row(1) == (5, 9, 11, 12, 13, 11)

    def test_row_four_of_b(self, portfolio_b):
        # N = (27,8,13), D = (0,15,4) -> C = (27,20,29)
        assert portfolio_b.C.row(4) == (27, 20, 29)

    def test_zero_triangles(self, zeros4):
        assert zeros4.C.to_rows() == [[0] * 4, [0] * 3, [0] * 2, [0]]

    def test_dimension_mismatch(self):
        n2 = xf.ClaimTriangle.from_rows([[1, 2], [3]])
        d3 = xf.ClaimTriangle.from_rows([[0, 0, 0], [0, 0], [0]])
        with pytest.raises(DimensionMismatch):
            xf.build_cumulative(n2, d3)

    def test_drop_exceeding_stock(self):
        n_tri = xf.ClaimTriangle.from_rows([[2, 0], [1]])
        d_tri = xf.ClaimTriangle.from_rows([[0, 3], [0]])
        with pytest.raises(DropExceedsStock):
            xf.build_cumulative(n_tri, d_tri)

    def test_incremental_identity(self, portfolio_b):
        # N - D equals the cumulative increments cell by cell.
        pair = portfolio_b
        for i in range(1, pair.n + 1):
            for j in range(1, pair.n - i + 1):
                lhs = pair.N.value(i, j + 1) - pair.D.value(i, j + 1)
                assert lhs == pair.C.value(i, j + 1) - pair.C.value(i, j)


class TestValidate:
    def test_published_portfolios_admissible(self, portfolio_a, portfolio_b):
        assert portfolio_a.validate().ok
        assert portfolio_b.validate().ok

    def test_first_column_drop_reported(self, portfolio_a):
        rows = portfolio_a.D.to_rows()
        rows[0][0] = 1
        report = xf.validate(portfolio_a.N, xf.ClaimTriangle.from_rows(rows), portfolio_a.E)
        assert not report.ok
        assert any(v.code == "first-column-drop" and v.origin == 1 for v in report.violations)

    def test_drop_exceeds_stock_located(self, portfolio_a):
        # C[2,1] = 11, so a drop of 12 at (2,2) is impossible.
        rows = portfolio_a.D.to_rows()
        rows[1][1] = 12
        report = xf.validate(portfolio_a.N, xf.ClaimTriangle.from_rows(rows), portfolio_a.E)
        codes = {(v.code, v.origin, v.dev) for v in report.violations}
        assert ("drop-exceeds-stock", 2, 2) in codes

    def test_single_cell_corruptions_all_caught(self, portfolio_a):
        # Raising any D cell above the stock at risk must be reported.
        pair = portfolio_a
        for i in range(1, pair.n + 1):
            for j in range(2, pair.n - i + 2):
                rows = pair.D.to_rows()
                rows[i - 1][j - 1] = pair.C.value(i, j - 1) + 1
                report = xf.validate(pair.N, xf.ClaimTriangle.from_rows(rows), pair.E)
                assert not report.ok

    def test_build_rejects_inadmissible(self, portfolio_a):
        rows = portfolio_a.D.to_rows()
        rows[0][0] = 2
        with pytest.raises(InvalidTriangleData) as err:
            xf.TrianglePair.build(
                portfolio_a.N, xf.ClaimTriangle.from_rows(rows), portfolio_a.E
            )
        assert not err.value.report.ok


class TestExposures:
    def test_positive_required(self):
        with pytest.raises(InvalidExposure):
            xf.ExposureVector(values=(1.0, 0.0))
        with pytest.raises(InvalidExposure):
            xf.ExposureVector(values=(1.0, 2.0), next_year=-1.0)

    def test_accessor_covers_next_year(self):
        exposures = xf.ExposureVector(values=(1.0, 2.0), next_year=3.0)
        assert exposures.of(2) == 2.0
        assert exposures.of(3) == 3.0
        with pytest.raises(InvalidExposure):
            exposures.of(4)

    def test_split_next_year(self):
        raw = xf.parse_exposure_csv("origin,exposure\n1,10\n2,20\n3,30\n")
        shaped = xf.split_next_year_exposure(raw, 2)
        assert shaped.values == (10.0, 20.0)
        assert shaped.next_year == 30.0
        with pytest.raises(DimensionMismatch):
            xf.split_next_year_exposure(raw, 5)


class TestTriangleCsv:
    def test_single_cell(self):
        tri = xf.parse_triangle_csv("origin,dev,value\n1,1,5\n")
        assert tri.n == 1 and tri.value(1, 1) == 5

    def test_roundtrip_on_bundled_data(self, portfolio_a, portfolio_b):
        for tri in (portfolio_a.N, portfolio_a.D, portfolio_b.N, portfolio_b.D):
            assert xf.parse_triangle_csv(xf.serialize_triangle_csv(tri)) == tri

    def test_rows_in_any_order(self, portfolio_a):
        lines = xf.serialize_triangle_csv(portfolio_a.N).strip().split("\n")
        shuffled = [lines[0]] + list(reversed(lines[1:]))
        assert xf.parse_triangle_csv("\n".join(shuffled) + "\n") == portfolio_a.N

    def test_missing_cell(self, portfolio_a):
        lines = xf.serialize_triangle_csv(portfolio_a.N).strip().split("\n")
        without = [line for line in lines if not line.startswith("3,2,")]
        with pytest.raises(MissingCell, match=r"\(3,2\)"):
            xf.parse_triangle_csv("\n".join(without) + "\n")

    def test_duplicate_cell(self):
        with pytest.raises(DuplicateCell):
            xf.parse_triangle_csv("origin,dev,value\n1,1,5\n1,1,6\n")

    def test_non_integer_value(self):
        with pytest.raises(NonInteger):
            xf.parse_triangle_csv("origin,dev,value\n1,1,5.5\n")

    def test_bad_header(self):
        with pytest.raises(MalformedCsv):
            xf.parse_triangle_csv("origin,dev,amount\n1,1,5\n")

    def test_explicit_n_out_of_triangle(self):
        text = "origin,dev,value\n1,1,1\n1,2,2\n2,1,3\n"
        with pytest.raises(OutOfTriangle):
            xf.parse_triangle_csv(text, n=1)

    def test_exposure_roundtrip(self):
        exposures = xf.ExposureVector(values=(20.0, 25.0), next_year=50.0)
        assert xf.parse_exposure_csv(xf.serialize_exposure_csv(exposures)).values == (
            20.0,
            25.0,
            50.0,
        )


@st.composite
def triangles(draw):
    n = draw(st.integers(min_value=1, max_value=6))
    rows = [
        draw(st.lists(st.integers(0, 50), min_size=n - i, max_size=n - i))
        for i in range(n)
    ]
    return xf.ClaimTriangle.from_rows(rows)


@given(triangles())
@settings(max_examples=60, deadline=None)
def test_csv_roundtrip_property(tri):
    assert xf.parse_triangle_csv(xf.serialize_triangle_csv(tri)) == tri
