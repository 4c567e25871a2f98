import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypomimiacoach.errors import (
    InconsistentAUSet,
    IntensityOutOfRange,
    MalformedLine,
    NonMonotoneTimestamp,
)
from hypomimiacoach.frames import (
    CANONICAL_AUS,
    AUFrame,
    parse_au_frame_stream,
    serialize_au_frames,
)


def line(record) -> bytes:
    return (json.dumps(record) + "\n").encode()


def test_parse_single_line_identity():
    frames = parse_au_frame_stream(b'{"t_ms":0,"au":{"AU12":0.0,"AU6":0.0}}\n')
    assert len(frames) == 1
    assert frames[0].t_ms == 0
    assert frames[0].intensities == {"AU12": 0.0, "AU6": 0.0}


def test_parse_repeated_timestamp_rejected():
    data = line({"t_ms": 0, "au": {"AU12": 0.1}}) + line({"t_ms": 0, "au": {"AU12": 0.2}})
    with pytest.raises(NonMonotoneTimestamp) as err:
        parse_au_frame_stream(data)
    assert err.value.line_no == 2


def test_parse_intensity_out_of_range():
    with pytest.raises(IntensityOutOfRange) as err:
        parse_au_frame_stream(b'{"t_ms":0,"au":{"AU12":1.5}}')
    assert err.value.line_no == 1
    assert err.value.au_code == "AU12"


def test_parse_malformed_json():
    with pytest.raises(MalformedLine) as err:
        parse_au_frame_stream(b"not json at all")
    assert err.value.line_no == 1


def test_parse_wrong_shape_records():
    with pytest.raises(MalformedLine):
        parse_au_frame_stream(line({"t_ms": 0}))
    with pytest.raises(MalformedLine):
        parse_au_frame_stream(line({"t_ms": -5, "au": {"AU12": 0.1}}))
    with pytest.raises(MalformedLine):
        parse_au_frame_stream(line({"t_ms": 0, "au": {}}))
    with pytest.raises(MalformedLine):
        parse_au_frame_stream(line({"t_ms": 0, "au": {"AU12": "high"}}))


def test_parse_inconsistent_au_set():
    data = line({"t_ms": 0, "au": {"AU12": 0.1, "AU6": 0.2}}) + line({"t_ms": 30, "au": {"AU12": 0.1}})
    with pytest.raises(InconsistentAUSet) as err:
        parse_au_frame_stream(data)
    assert err.value.line_no == 2


def test_blank_lines_skipped_but_counted():
    data = line({"t_ms": 0, "au": {"AU12": 0.1}}) + b"\n" + line({"t_ms": 30, "au": {"AU12": 1.5}})
    with pytest.raises(IntensityOutOfRange) as err:
        parse_au_frame_stream(data)
    assert err.value.line_no == 3


def test_frame_validation():
    with pytest.raises(ValueError):
        AUFrame(t_ms=-1, intensities={"AU12": 0.5})
    with pytest.raises(ValueError):
        AUFrame(t_ms=0, intensities={"AU12": float("nan")})
    with pytest.raises(ValueError):
        AUFrame(t_ms=0, intensities={})


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.integers(min_value=1, max_value=100),
            st.lists(
                st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                min_size=len(CANONICAL_AUS),
                max_size=len(CANONICAL_AUS),
            ),
        ),
        min_size=0,
        max_size=20,
    )
)
def test_round_trip_parse_serialize(steps):
    t = 0
    frames = []
    for dt, values in steps:
        t += dt
        frames.append(AUFrame(t_ms=t, intensities=dict(zip(CANONICAL_AUS, values))))
    assert parse_au_frame_stream(serialize_au_frames(frames)) == frames
