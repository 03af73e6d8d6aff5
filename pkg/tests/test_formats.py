"""Tests for coseg/formats.py - Mesh format registry.

This module tests:
- FORMAT_SPECS registry completeness
- get_format_spec lookup
- detect_format from suffix and declared name, for reading and writing
"""

from pathlib import Path

import pytest

from coseg.errors import ParseError
from coseg.formats import FORMAT_SPECS, MeshFormat, detect_format, get_format_spec


class TestFormatSpecs:
    """Tests for the format registry."""

    def test_every_format_registered(self) -> None:
        """Each MeshFormat has a spec."""
        assert set(FORMAT_SPECS) == set(MeshFormat)

    def test_obj_is_read_only(self) -> None:
        """OBJ can be read but not written."""
        spec = FORMAT_SPECS[MeshFormat.OBJ]

        assert spec.readable
        assert not spec.writable

    def test_ply_is_writable(self) -> None:
        assert FORMAT_SPECS[MeshFormat.PLY].writable


class TestGetFormatSpec:
    def test_case_insensitive(self) -> None:
        """Format names are matched case-insensitively."""
        assert get_format_spec("OFF") is FORMAT_SPECS[MeshFormat.OFF]

    def test_unknown_returns_none(self) -> None:
        assert get_format_spec("stl") is None
        assert get_format_spec(None) is None


class TestDetectFormat:
    """Tests for detect_format."""

    @pytest.mark.parametrize(
        "name,expected",
        [("a.off", MeshFormat.OFF), ("b.OBJ", MeshFormat.OBJ), ("c.ply", MeshFormat.PLY)],
    )
    def test_from_suffix(self, name: str, expected: MeshFormat) -> None:
        """Suffix selects the format."""
        assert detect_format(Path(name)) is expected

    def test_declared_overrides_suffix(self) -> None:
        """A declared format wins over the suffix."""
        assert detect_format(Path("mesh.txt"), "obj") is MeshFormat.OBJ
        assert detect_format(Path("mesh.txt"), MeshFormat.OFF) is MeshFormat.OFF

    def test_unknown_declared_raises(self) -> None:
        """Unknown declared names list the valid ones."""
        with pytest.raises(ParseError, match="Valid formats"):
            detect_format(Path("mesh.off"), "stl")

    def test_writing_rejects_read_only_format(self) -> None:
        with pytest.raises(ParseError, match="not writable"):
            detect_format(Path("mesh.obj"), for_writing=True)

    def test_writing_accepts_writable_format(self) -> None:
        assert detect_format(Path("mesh.ply"), for_writing=True) is MeshFormat.PLY
