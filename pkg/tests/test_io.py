import json

import numpy as np
import pytest

from zfising.io import (DuplicateEdge, MalformedModel, ModelFileError, SelfLoop, VertexOutOfRange,
                        parse_model_file, read_model, write_model_file)
from zfising.model import IsingModel

from conftest import complete_graph


def _doc(n, edges):
    return json.dumps({"num_vertices": n, "edges": [{"u": u, "v": v, "j": j} for u, v, j in edges]})


def test_round_trip_preserves_couplings_exactly(tmp_path):
    rng = np.random.default_rng(0)
    m = IsingModel(complete_graph(5), rng.normal(size=10) * 1e-3)
    text = write_model_file(m)
    back = parse_model_file(text)
    assert back.graph.edges == m.graph.edges
    assert np.array_equal(back.couplings, m.couplings)
    path = tmp_path / "m.json"
    path.write_text(text)
    assert np.array_equal(read_model(str(path)).couplings, m.couplings)


def test_empty_and_integer_couplings():
    m = parse_model_file(_doc(3, [(0, 1, 1), (2, 1, -2)]))
    assert m.graph.edges == ((0, 1), (1, 2))
    assert m.couplings.tolist() == [1.0, -2.0]
    assert parse_model_file(_doc(2, [])).graph.num_edges == 0


@pytest.mark.parametrize("text,exc", [
    (_doc(3, [(0, 1, 0.1), (1, 0, 0.2)]), DuplicateEdge),
    (_doc(3, [(1, 1, 0.1)]), SelfLoop),
    (_doc(3, [(0, 3, 0.1)]), VertexOutOfRange),
    (_doc(3, [(-1, 0, 0.1)]), VertexOutOfRange),
    ("{not json", MalformedModel),
    ("[]", MalformedModel),
    ('{"num_vertices": 2}', MalformedModel),
    ('{"num_vertices": "2", "edges": []}', MalformedModel),
    ('{"num_vertices": 2, "edges": [{"u": 0, "v": 1}]}', MalformedModel),
    ('{"num_vertices": 2, "edges": [{"u": 0, "v": 1, "j": true}]}', MalformedModel),
    ('{"num_vertices": 2, "edges": [{"u": 0.0, "v": 1, "j": 1}]}', MalformedModel),
    ('{"num_vertices": 2, "edges": [{"u": 0, "v": 1, "j": NaN}]}', MalformedModel),
    ('{"num_vertices": -1, "edges": []}', MalformedModel),
])
def test_rejections(text, exc):
    with pytest.raises(exc) as info:
        parse_model_file(text)
    assert isinstance(info.value, ModelFileError)
