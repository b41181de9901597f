import json

import pytest

from signolab import cases, problem
from signolab.problem import ProblemFileError


@pytest.mark.parametrize("name", sorted(cases.CASES))
def test_round_trip(name):
    spec = cases.get_case(name).spec
    text = problem.dumps(spec)
    back = problem.loads(text)
    assert problem.dumps(back) == text
    assert back.polygon == spec.polygon
    assert [s.tag for s in back.segments] == [s.tag for s in spec.segments]


def test_emit_is_byte_stable():
    assert problem.dumps(cases.endpoint_case().spec) == problem.dumps(cases.endpoint_case().spec)


def test_polynomial_segment_data():
    d = {
        "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]],
        "segments": [
            {"edges": [0], "tag": "S"},
            {"edges": [1], "tag": "D"},
            {"edges": [2], "tag": "U", "data": [0.0, 1.0]},
            {"edges": [3], "tag": "D"},
        ],
    }
    spec = problem.spec_from_dict(d)
    assert spec.segments[2].data == (0.0, 1.0)
    assert json.loads(problem.dumps(spec))["segments"][2]["data"] == [0.0, 1.0]


@pytest.mark.parametrize(
    "text",
    [
        "{not json",
        "[]",
        '{"vertices": [[0,0],[1,0],[0,1]]}',
        '{"vertices": [[0,0],[1,0],[0,1]], "segments": [], "colour": 1}',
        '{"vertices": [[0,0],[1,0],[0,1]], "segments": [{"edges": [0,1,2], "tag": "D", "x": 1}]}',
        '{"vertices": [[0,0],[1,0],[0,1]], "segments": [{"edges": [0,1,2], "tag": "Q"}]}',
        '{"vertices": [[0,0],[1,0],[0,1]], "segments": [{"edges": [0,1,2], "tag": "D"}], "load": {"name": "bessel"}}',
        '{"vertices": [[0,0],[1,0],[0,1]], "segments": [{"edges": [0,1,2], "tag": "D", "data": [1,2,3,4,5,6]}]}',
    ],
)
def test_malformed_files(text):
    with pytest.raises(ProblemFileError):
        problem.loads(text)
