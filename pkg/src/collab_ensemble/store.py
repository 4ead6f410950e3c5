"""Versioned, checksummed text files for ensembles and item catalogs.

Every file starts with a two-line header::

    CEL v1
    sha256 <hex digest of everything after this line>

followed by a line-oriented body. Floats are written with ``repr``, the
shortest decimal that round-trips to the same double, so a saved model
reloads bit-for-bit. Writes go to a temporary file in the target directory
and are renamed into place, so readers never see a partial file.

A store is a directory holding ``ensemble.cel`` and ``catalog.cel``.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np

from .calibration import PreferenceModel
from .ensemble import EnsembleModel
from .errors import InputError, StateError, StoreFormatError, StoreVersionError
from .features import FeatureVector, ItemCatalog, KernelConfig, format_features, parse_features
from .svm import SvmModel, SvmParams

FORMAT_VERSION = 1
MAGIC = "CEL"
ENSEMBLE_FILE = "ensemble.cel"
CATALOG_FILE = "catalog.cel"


def catalog_fingerprint(catalog: ItemCatalog) -> str:
    """Short content hash identifying a catalog's ids and feature values."""
    return hashlib.sha256(format_features(catalog).encode("utf-8")).hexdigest()[:16]


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def wrap(body: str) -> str:
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{MAGIC} v{FORMAT_VERSION}\nsha256 {digest}\n{body}"


def unwrap(text: str, source: str = "<store>") -> str:
    """Check the header and checksum, returning the body.

    Raises:
        StoreVersionError: the file declares another format version.
        StoreFormatError: the header is missing or the checksum does not match.
    """
    head, sep, rest = text.partition("\n")
    parts = head.split()
    if len(parts) != 2 or parts[0] != MAGIC or not parts[1].startswith("v"):
        raise StoreFormatError(f"{source}: not a {MAGIC} store file")
    if parts[1] != f"v{FORMAT_VERSION}":
        raise StoreVersionError(
            f"{source}: store format {parts[1]} is not supported (expected v{FORMAT_VERSION})"
        )
    check, _, body = rest.partition("\n")
    fields = check.split()
    if len(fields) != 2 or fields[0] != "sha256":
        raise StoreFormatError(f"{source}: missing checksum line")
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != fields[1]:
        raise StoreFormatError(f"{source}: checksum mismatch, file is corrupt")
    return body


# --------------------------------------------------------------------------
# ensemble body


def _vector_cells(vec: FeatureVector) -> str:
    return " ".join(f"{i}:{v!r}" for i, v in zip(vec.indices.tolist(), vec.values.tolist()))


def format_ensemble(ensemble: EnsembleModel) -> str:
    k = ensemble.kernel
    p = ensemble.params
    dims = {m.svm.dim for m in ensemble.members if m.svm.dim is not None}
    lines = [
        f"kernel\t{k.kind}\t{'none' if k.gamma is None else repr(k.gamma)}",
        f"C\t{p.C!r}",
        f"kkt_tolerance\t{p.kkt_tolerance!r}",
        f"max_passes\t{'none' if p.max_passes is None else p.max_passes}",
        f"catalog_id\t{ensemble.catalog_id}",
        f"dim\t{dims.pop() if dims else 'none'}",
        f"pending\t{len(ensemble.pending)}",
    ]
    lines.extend(ensemble.pending)
    lines.append(f"members\t{len(ensemble.members)}")
    for m in ensemble.members:
        s = m.svm
        lines += [
            f"member\t{m.user_id}",
            f"slope\t{m.slope!r}",
            f"bias\t{s.bias!r}",
            f"svm_C\t{s.C!r}",
            f"converged\t{int(s.converged)}",
            f"trained_on\t{m.trained_on}",
            f"support\t{len(s.item_ids)}",
        ]
        for item_id, vec, y, a in zip(s.item_ids, s.vectors, s.labels.tolist(), s.alphas.tolist()):
            lines.append(f"{item_id}\t{int(y):+d}\t{a!r}\t{_vector_cells(vec)}")
    return "\n".join(lines) + "\n"


class _Lines:
    def __init__(self, body: str, source: str):
        self.lines = body.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0
        self.source = source

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise StoreFormatError(f"{self.source}: unexpected end of file")
        self.pos += 1
        return self.lines[self.pos - 1]

    def field(self, name: str) -> list[str]:
        parts = self.next().split("\t")
        if parts[0] != name:
            raise StoreFormatError(f"{self.source}: line {self.pos + 2}: expected {name!r}, got {parts[0]!r}")
        return parts[1:]

    def fail(self, msg: str):
        raise StoreFormatError(f"{self.source}: line {self.pos + 2}: {msg}")


def _none_or(value: str, cast):
    return None if value == "none" else cast(value)


def parse_ensemble(body: str, source: str = "<store>") -> EnsembleModel:
    r = _Lines(body, source)
    try:
        kind, gamma = r.field("kernel")
        kern = KernelConfig(kind, _none_or(gamma, float))
        params = SvmParams(
            C=float(r.field("C")[0]),
            kkt_tolerance=float(r.field("kkt_tolerance")[0]),
            max_passes=_none_or(r.field("max_passes")[0], int),
        )
        (catalog_id,) = r.field("catalog_id") or [""]
        dim = _none_or(r.field("dim")[0], int)
        pending = tuple(r.next() for _ in range(int(r.field("pending")[0])))
        members = []
        for _ in range(int(r.field("members")[0])):
            (user_id,) = r.field("member")
            slope = float(r.field("slope")[0])
            bias = float(r.field("bias")[0])
            svm_c = float(r.field("svm_C")[0])
            converged = r.field("converged")[0] == "1"
            trained_on = int(r.field("trained_on")[0])
            ids, vecs, labels, alphas = [], [], [], []
            for _ in range(int(r.field("support")[0])):
                parts = r.next().split("\t")
                if len(parts) != 4:
                    r.fail("support line needs 4 tab-separated fields")
                pairs = [(int(i), float(v)) for i, v in (c.split(":", 1) for c in parts[3].split())]
                ids.append(parts[0])
                labels.append(int(parts[1]))
                alphas.append(float(parts[2]))
                vecs.append(FeatureVector.from_pairs(pairs, dim))
            svm = SvmModel(
                item_ids=tuple(ids),
                vectors=tuple(vecs),
                labels=np.array(labels, dtype=np.float64),
                alphas=np.array(alphas, dtype=np.float64),
                bias=bias,
                kernel=kern,
                C=svm_c,
                converged=converged,
            )
            members.append(PreferenceModel(svm=svm, slope=slope, user_id=user_id, trained_on=trained_on))
    except StoreFormatError:
        raise
    except (ValueError, TypeError, InputError) as exc:
        r.fail(str(exc))
    if r.pos != len(r.lines):
        r.fail("trailing content")
    return EnsembleModel(
        members=tuple(members), kernel=kern, params=params, catalog_id=catalog_id, pending=pending
    )


# --------------------------------------------------------------------------
# file level


def save_ensemble(path, ensemble: EnsembleModel) -> None:
    _atomic_write(Path(path), wrap(format_ensemble(ensemble)))


def load_ensemble(path) -> EnsembleModel:
    return parse_ensemble(unwrap(_read(path), str(path)), str(path))


def save_catalog(path, catalog: ItemCatalog) -> None:
    _atomic_write(Path(path), wrap(format_features(catalog)))


def load_catalog(path) -> ItemCatalog:
    body = unwrap(_read(path), str(path))
    try:
        return parse_features(body.split("\n"))
    except InputError as exc:
        raise StoreFormatError(f"{path}: {exc}") from None


def _read(path) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except FileNotFoundError:
        raise StateError(f"store file {str(path)!r} does not exist") from None


class ModelStore:
    """Directory holding one ensemble and the catalog it was trained on."""

    def __init__(self, root):
        self.root = Path(root)

    @property
    def ensemble_path(self) -> Path:
        return self.root / ENSEMBLE_FILE

    @property
    def catalog_path(self) -> Path:
        return self.root / CATALOG_FILE

    def exists(self) -> bool:
        return self.ensemble_path.exists() and self.catalog_path.exists()

    def save(self, ensemble: EnsembleModel, catalog: ItemCatalog) -> None:
        if ensemble.catalog_id and ensemble.catalog_id != catalog_fingerprint(catalog):
            raise StateError("ensemble was trained on a different catalog")
        save_catalog(self.catalog_path, catalog)
        save_ensemble(self.ensemble_path, ensemble)

    def load(self) -> tuple[EnsembleModel, ItemCatalog]:
        """Load both files and check they belong together.

        Raises:
            StateError: the store is missing or its files do not match.
            StoreFormatError: a file is corrupt or has an unknown version.
        """
        if not self.exists():
            raise StateError(f"no model store at {str(self.root)!r}")
        catalog = load_catalog(self.catalog_path)
        ensemble = load_ensemble(self.ensemble_path)
        if ensemble.catalog_id and ensemble.catalog_id != catalog_fingerprint(catalog):
            raise StateError("stored ensemble and catalog do not match")
        return ensemble, catalog
