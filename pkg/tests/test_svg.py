"""SVG chart output: well-formed, deterministic, NaN-safe."""
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lpdecomp.svg import line_chart
from lpdecomp.util import DesignError

_NS = "{http://www.w3.org/2000/svg}"


def _elements(svg: str, tag: str):
    return ET.fromstring(svg).iter(_NS + tag)


def test_chart_is_well_formed_xml():
    x = np.arange(10.0)
    svg = line_chart(
        x,
        [("a", np.sin(x)), ("b", np.cos(x))],
        band=("band", np.sin(x) - 0.5, np.sin(x) + 0.5),
        title="levels & <spreads>",
        x_label="t",
        y_label="value",
    )
    root = ET.fromstring(svg)
    assert root.tag == _NS + "svg"
    assert root.attrib["version"] == "1.1"
    assert len(list(_elements(svg, "polyline"))) == 2
    assert len(list(_elements(svg, "polygon"))) == 1


def test_identical_input_gives_identical_bytes():
    x = np.arange(25.0)
    y = np.sqrt(x)
    a = line_chart(x, [("s", y)], title="t")
    b = line_chart(x, [("s", y)], title="t")
    assert a == b


def test_nan_gap_splits_the_line():
    x = np.arange(12.0)
    y = x.copy()
    y[5] = np.nan
    svg = line_chart(x, [("broken", y)], zero_line=False)
    assert len(list(_elements(svg, "polyline"))) == 2


def test_single_surviving_point_becomes_a_dot():
    x = np.arange(5.0)
    y = np.array([np.nan, np.nan, 2.0, np.nan, np.nan])
    svg = line_chart(x, [("dot", y)])
    assert len(list(_elements(svg, "polyline"))) == 0
    assert any(c.attrib.get("r") == "2.2" for c in _elements(svg, "circle"))


def test_date_ticks_are_rendered():
    x = np.arange(6.0)
    svg = line_chart(
        x, [("v", x)], x_ticks=[(0, "1960-01"), (5, "1960-06")]
    )
    texts = [t.text for t in _elements(svg, "text")]
    assert "1960-01" in texts and "1960-06" in texts


def test_validation():
    with pytest.raises(DesignError):
        line_chart(np.arange(3.0), [])
    with pytest.raises(DesignError):
        line_chart(np.arange(3.0), [("bad", np.arange(4.0))])
    with pytest.raises(DesignError):
        line_chart(np.arange(3.0), [("allnan", np.full(3, np.nan))])
    with pytest.raises(DesignError):
        line_chart(
            np.arange(3.0),
            [("x", np.arange(3.0))],
            band=("b", np.arange(2.0), np.arange(2.0)),
        )


def test_constant_series_still_plots():
    svg = line_chart(np.arange(4.0), [("flat", np.full(4, 2.5))])
    assert len(list(_elements(svg, "polyline"))) == 1
