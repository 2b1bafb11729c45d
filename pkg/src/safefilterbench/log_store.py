"""
Log Store Module

NPY/NPZ serialization of EpisodeLog. Archives are written uncompressed with
fixed timestamps and member order so identical logs give identical bytes;
the reader also accepts deflate members and NPY format versions 2 and 3.
"""

import enum
import io
import json
import logging
import math
import struct
import warnings
import zipfile
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
from numpy.lib import format as npy_format

from .errors import (
    ArchiveError,
    ArchiveMemberError,
    ArchiveSchemaError,
    HeaderSyntaxError,
    NotNpyError,
    NpyFormatError,
    UnknownMemberWarning,
    UnsupportedDtypeError,
)
from .sim_core import TRACE_DTYPES, EpisodeLog
from .utils import PathLike, canonical_json, wrap_os_error

logger = logging.getLogger(__name__)

NPY_MAGIC = b"\x93NUMPY"
ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)
METADATA_MEMBER = "metadata"
ARCHIVE_ORDER = tuple(TRACE_DTYPES) + (METADATA_MEMBER,)
REQUIRED_ARRAYS = frozenset(ARCHIVE_ORDER)
HEADER_KEYS = frozenset({"descr", "fortran_order", "shape"})


class NpyDtype(enum.Enum):
    """Supported element types, valued by their NPY descr string."""

    F64 = "<f8"
    F32 = "<f4"
    I64 = "<i8"
    I32 = "<i4"
    BOOL = "|b1"
    U8 = "|u1"

    @property
    def numpy(self) -> np.dtype:
        return np.dtype(self.value)

    @classmethod
    def from_descr(cls, descr: str) -> "NpyDtype":
        aliases = {"<b1": "|b1", "<u1": "|u1"}
        normalized = aliases.get(descr, descr)
        for member in cls:
            if member.value == normalized:
                return member
        raise UnsupportedDtypeError(descr)

    @classmethod
    def from_numpy(cls, dtype: np.dtype) -> "NpyDtype":
        return cls.from_descr(np.dtype(dtype).newbyteorder("<").str)


@dataclass(frozen=True)
class NpyDescriptor:
    """
    Parsed NPY header.

    Attributes:
        dtype: Element type
        fortran_order: Column-major payload
        shape: Array dimensions (empty for a scalar)
    """

    dtype: NpyDtype
    fortran_order: bool
    shape: Tuple[int, ...]

    @property
    def count(self) -> int:
        return math.prod(self.shape)

    @property
    def nbytes(self) -> int:
        return self.count * self.dtype.numpy.itemsize


@dataclass(frozen=True)
class MemberExtent:
    """Where an archive member lives and what it holds."""

    descriptor: NpyDescriptor
    header_offset: int
    compressed_size: int
    compress_type: int


@dataclass(frozen=True)
class ArchiveManifest:
    """Array name to descriptor and byte extent for one archive."""

    members: Dict[str, MemberExtent]

    @property
    def missing(self) -> Tuple[str, ...]:
        return tuple(sorted(REQUIRED_ARRAYS - set(self.members)))


class _HeaderParser:
    """Recursive-descent parser for the NPY header dictionary literal."""

    def __init__(self, text: str, base: int):
        self.text = text
        self.pos = 0
        self.base = base

    def error(self, message: str) -> HeaderSyntaxError:
        return HeaderSyntaxError(message, self.base + self.pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def skip_ws(self) -> None:
        while self.peek() in (" ", "\t", "\n", "\r") and self.peek():
            self.pos += 1

    def expect(self, char: str) -> None:
        self.skip_ws()
        if self.peek() != char:
            raise self.error(f"expected {char!r}")
        self.pos += 1

    def parse(self) -> Dict[str, object]:
        self.expect("{")
        entries: Dict[str, object] = {}
        self.skip_ws()
        while self.peek() != "}":
            key = self.string()
            if key in entries:
                raise self.error(f"duplicate key {key!r}")
            self.expect(":")
            entries[key] = self.value()
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
                self.skip_ws()
            elif self.peek() != "}":
                raise self.error("expected ',' or '}'")
        self.pos += 1
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error("trailing characters after header dictionary")
        return entries

    def string(self) -> str:
        self.skip_ws()
        quote = self.peek()
        if quote not in ("'", '"'):
            raise self.error("expected a quoted string")
        end = self.text.find(quote, self.pos + 1)
        if end < 0:
            raise self.error("unterminated string")
        value = self.text[self.pos + 1 : end]
        self.pos = end + 1
        return value

    def value(self) -> object:
        self.skip_ws()
        char = self.peek()
        if char in ("'", '"'):
            return self.string()
        if char == "(":
            return self.shape()
        for word, result in (("True", True), ("False", False)):
            if self.text.startswith(word, self.pos):
                self.pos += len(word)
                return result
        raise self.error("expected a string, a boolean or a tuple")

    def shape(self) -> Tuple[int, ...]:
        self.expect("(")
        dims = []
        self.skip_ws()
        while self.peek() != ")":
            start = self.pos
            while self.peek().isdigit() and self.peek().isascii():
                self.pos += 1
            if start == self.pos:
                raise self.error("expected a non-negative integer")
            dims.append(int(self.text[start : self.pos]))
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
                self.skip_ws()
            elif self.peek() != ")":
                raise self.error("expected ',' or ')'")
            elif len(dims) == 1 and self.text[self.pos - 1] != ",":
                # "(3)" is an integer, not a tuple
                raise self.error("single-element shape needs a trailing comma")
        self.pos += 1
        return tuple(dims)


def parse_npy_header(data: bytes) -> Tuple[NpyDescriptor, int]:
    """
    Parse the NPY preamble and header dictionary.

    Args:
        data: Bytes starting at the NPY magic string

    Returns:
        (descriptor, offset of the first payload byte)
    """
    if len(data) < len(NPY_MAGIC) or data[: len(NPY_MAGIC)] != NPY_MAGIC:
        raise NotNpyError("missing NPY magic string")
    if len(data) < 8:
        raise HeaderSyntaxError("truncated version field", len(data))
    major, minor = data[6], data[7]
    if minor != 0:
        raise HeaderSyntaxError(f"unsupported format version {major}.{minor}", 7)
    if major == 1:
        size_fmt, start = "<H", 10
    elif major in (2, 3):
        size_fmt, start = "<I", 12
    else:
        raise HeaderSyntaxError(f"unsupported format version {major}.{minor}", 6)
    if len(data) < start:
        raise HeaderSyntaxError("truncated header length", len(data))
    (header_len,) = struct.unpack(size_fmt, data[8:start])
    end = start + header_len
    if len(data) < end:
        raise HeaderSyntaxError("truncated header", len(data))

    try:
        text = data[start:end].decode("utf-8" if major == 3 else "latin-1")
    except UnicodeDecodeError as err:
        raise HeaderSyntaxError("header is not valid utf-8", start + err.start) from None
    entries = _HeaderParser(text, start).parse()

    if set(entries) != HEADER_KEYS:
        raise HeaderSyntaxError(
            f"header keys {sorted(entries)} differ from {sorted(HEADER_KEYS)}", start
        )
    descr, fortran, shape = entries["descr"], entries["fortran_order"], entries["shape"]
    if not isinstance(descr, str):
        raise HeaderSyntaxError("descr must be a string", start)
    if not isinstance(fortran, bool):
        raise HeaderSyntaxError("fortran_order must be a boolean", start)
    if not isinstance(shape, tuple):
        raise HeaderSyntaxError("shape must be a tuple", start)
    return NpyDescriptor(NpyDtype.from_descr(descr), fortran, shape), end


def encode_npy(array: np.ndarray) -> bytes:
    """Serialize an array as a C-order NPY v1.0 payload with a 64-byte aligned header."""
    dtype = NpyDtype.from_numpy(array.dtype)
    buffer = io.BytesIO()
    npy_format.write_array(
        buffer,
        np.asarray(array, dtype=dtype.numpy, order="C"),
        version=(1, 0),
        allow_pickle=False,
    )
    return buffer.getvalue()


def decode_npy(data: bytes) -> np.ndarray:
    """
    Decode one NPY payload.

    The header is validated by parse_npy_header before numpy reads the array.

    Args:
        data: Complete NPY file contents

    Returns:
        Array owning its memory
    """
    descriptor, offset = parse_npy_header(data)
    if len(data) - offset < descriptor.nbytes:
        raise NpyFormatError(
            f"payload holds {len(data) - offset} bytes, header declares {descriptor.nbytes}"
        )
    try:
        array = npy_format.read_array(io.BytesIO(data), allow_pickle=False)
    except (ValueError, SyntaxError) as err:
        raise NpyFormatError(f"numpy rejected the payload: {err}") from err
    return array.astype(descriptor.dtype.numpy, copy=False)


def _metadata_array(metadata: Dict) -> np.ndarray:
    return np.frombuffer(canonical_json(metadata, indent=None).encode("utf-8"), dtype=np.uint8)


def write_npz(log: EpisodeLog, path: PathLike) -> None:
    """
    Write an EpisodeLog as a deterministic, uncompressed NPZ archive.

    Args:
        log: Episode log
        path: Destination file
    """
    log.validate()
    members = dict(log.arrays())
    members[METADATA_MEMBER] = _metadata_array(log.metadata)
    with wrap_os_error(path, "write"):
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
            for name in ARCHIVE_ORDER:
                info = zipfile.ZipInfo(f"{name}.npy", date_time=ZIP_EPOCH)
                info.compress_type = zipfile.ZIP_STORED
                info.create_system = 3
                info.external_attr = 0o644 << 16
                archive.writestr(info, encode_npy(members[name]))


def _read_members(path: PathLike) -> Tuple[Dict[str, bytes], Dict[str, zipfile.ZipInfo]]:
    with wrap_os_error(path, "read"):
        try:
            with zipfile.ZipFile(path, "r") as archive:
                payloads, infos = {}, {}
                for info in archive.infolist():
                    if info.is_dir():
                        continue
                    name = info.filename[:-4] if info.filename.endswith(".npy") else info.filename
                    payloads[name] = archive.read(info)
                    infos[name] = info
                return payloads, infos
        except (zipfile.BadZipFile, zlib.error, EOFError, NotImplementedError) as err:
            raise ArchiveError(f"{path}: unreadable zip container: {err}") from err


def read_manifest(path: PathLike) -> ArchiveManifest:
    """Descriptors and byte extents of every member in an archive."""
    payloads, infos = _read_members(path)
    members = {}
    for name, data in payloads.items():
        try:
            descriptor, _ = parse_npy_header(data)
        except NpyFormatError as err:
            raise ArchiveMemberError(name, err) from err
        info = infos[name]
        members[name] = MemberExtent(
            descriptor, info.header_offset, info.compress_size, info.compress_type
        )
    return ArchiveManifest(members)


def read_npz(path: PathLike) -> EpisodeLog:
    """
    Read an episode archive.

    Unknown members are ignored with an UnknownMemberWarning.

    Args:
        path: Archive file

    Returns:
        EpisodeLog
    """
    payloads, _ = _read_members(path)
    missing = REQUIRED_ARRAYS - set(payloads)
    if missing:
        raise ArchiveSchemaError(missing)

    arrays = {}
    for name, data in payloads.items():
        if name not in REQUIRED_ARRAYS:
            logger.warning("%s: ignoring unknown member %r", path, name)
            warnings.warn(f"{path}: ignoring unknown member {name!r}", UnknownMemberWarning)
            continue
        try:
            arrays[name] = decode_npy(data)
        except NpyFormatError as err:
            raise ArchiveMemberError(name, err) from err

    raw_metadata = arrays.pop(METADATA_MEMBER)
    try:
        metadata = json.loads(raw_metadata.astype(np.uint8).tobytes().decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as err:
        raise ArchiveMemberError(METADATA_MEMBER, err) from err

    for name, dtype in TRACE_DTYPES.items():
        if arrays[name].dtype != dtype:
            arrays[name] = arrays[name].astype(dtype)
    log = EpisodeLog(metadata=metadata, **arrays)
    try:
        log.validate()
    except ValueError as err:
        raise ArchiveError(f"{path}: {err}") from err
    return log


def run_archive_path(root: PathLike, filter_name: str, level: str, seed: int) -> Path:
    """Location of data.npz inside a results tree."""
    return Path(root) / filter_name / level / str(seed) / "data.npz"
