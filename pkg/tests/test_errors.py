"""Tests for errors module"""

import pickle

import pytest

from safefilterbench.errors import (
    ArchiveMemberError,
    ArchiveSchemaError,
    ConfigError,
    HeaderSyntaxError,
    UnsupportedDtypeError,
)


@pytest.mark.parametrize(
    "error",
    [
        ConfigError("steps must be an integer", 4),
        ConfigError("seed list is empty"),
        UnsupportedDtypeError("|O"),
        HeaderSyntaxError("unterminated string", 57),
        ArchiveSchemaError(["dist_goal_arm", "q_trace"]),
        ArchiveMemberError("dist_goal_arm", HeaderSyntaxError("expected ':'", 21)),
    ],
)
def test_errors_pickle_round_trip(error):
    """Test errors keep their type, message and attributes across processes"""
    restored = pickle.loads(pickle.dumps(error))
    assert type(restored) is type(error)
    assert str(restored) == str(error)
    assert vars(restored).keys() == vars(error).keys()


def test_error_attributes_after_pickle():
    """Test structured fields survive pickling"""
    header = pickle.loads(pickle.dumps(HeaderSyntaxError("unterminated string", 57)))
    assert header.position == 57
    assert str(header) == "unterminated string at byte 57"

    schema = pickle.loads(pickle.dumps(ArchiveSchemaError(["q_trace", "dist_goal_arm"])))
    assert schema.missing == ["dist_goal_arm", "q_trace"]
    assert str(schema) == "archive is missing required arrays: dist_goal_arm, q_trace"

    member = pickle.loads(pickle.dumps(ArchiveMemberError("metadata", ValueError("bad json"))))
    assert member.member == "metadata"
    assert str(member) == "member 'metadata': bad json"

    config = pickle.loads(pickle.dumps(ConfigError("unknown key 'x'", 3)))
    assert config.line == 3
    assert str(config) == "line 3: unknown key 'x'"
