from __future__ import annotations

import os

import numpy as np
import pytest

from collab_ensemble.ensemble import UserRatings, add_user, build_ensemble
from collab_ensemble.errors import StateError, StoreFormatError, StoreVersionError
from collab_ensemble.features import KernelConfig
from collab_ensemble.store import (
    ModelStore,
    catalog_fingerprint,
    format_ensemble,
    load_catalog,
    load_ensemble,
    save_ensemble,
)
from collab_ensemble.svm import SvmParams, decision_values
from collab_ensemble.synthetic import load_fixture


@pytest.fixture(scope="module")
def trained():
    catalog, users = load_fixture()
    ens = build_ensemble(users[:6], catalog, SvmParams(C=1.0), KernelConfig.rbf(0.05), seed=4,
                         catalog_id=catalog_fingerprint(catalog))
    ens = add_user(ens, UserRatings("fan", {catalog.ids[0]: 1}), catalog)
    return ens, catalog


class TestRoundTrip:
    def test_decision_values_preserved(self, trained, tmp_path):
        ens, catalog = trained
        store = ModelStore(tmp_path / "s")
        store.save(ens, catalog)
        back, cat2 = store.load()
        assert back.user_ids == ens.user_ids and back.pending == ("fan",)
        assert back.kernel == ens.kernel and back.params == ens.params
        probe = cat2.matrix
        for a, b in zip(ens.members, back.members):
            assert a.slope == b.slope and a.trained_on == b.trained_on
            np.testing.assert_allclose(decision_values(b.svm, probe), decision_values(a.svm, catalog.matrix), rtol=0, atol=1e-15)
            np.testing.assert_array_equal(a.svm.alphas, b.svm.alphas)
            assert a.svm.bias == b.svm.bias

    def test_catalog_identical(self, trained, tmp_path):
        ens, catalog = trained
        store = ModelStore(tmp_path)
        store.save(ens, catalog)
        back = load_catalog(store.catalog_path)
        assert catalog_fingerprint(back) == catalog_fingerprint(catalog)

    def test_serialization_stable(self, trained, tmp_path):
        ens, _ = trained
        save_ensemble(tmp_path / "a.cel", ens)
        save_ensemble(tmp_path / "b.cel", load_ensemble(tmp_path / "a.cel"))
        assert (tmp_path / "a.cel").read_bytes() == (tmp_path / "b.cel").read_bytes()

    def test_header(self, trained, tmp_path):
        ens, _ = trained
        save_ensemble(tmp_path / "e.cel", ens)
        lines = (tmp_path / "e.cel").read_text().splitlines()
        assert lines[0] == "CEL v1" and lines[1].startswith("sha256 ")
        assert "slope" in format_ensemble(ens)


class TestRejection:
    def test_version_mismatch(self, trained, tmp_path):
        ens, _ = trained
        p = tmp_path / "e.cel"
        save_ensemble(p, ens)
        p.write_text(p.read_text().replace("CEL v1", "CEL v2", 1))
        with pytest.raises(StoreVersionError, match="v2"):
            load_ensemble(p)

    def test_checksum(self, trained, tmp_path):
        ens, _ = trained
        p = tmp_path / "e.cel"
        save_ensemble(p, ens)
        text = p.read_text()
        p.write_text(text.replace("slope\t", "slope\t-", 1))
        with pytest.raises(StoreFormatError, match="checksum"):
            load_ensemble(p)

    def test_not_a_store(self, tmp_path):
        p = tmp_path / "x.cel"
        p.write_text("hello\n")
        with pytest.raises(StoreFormatError):
            load_ensemble(p)

    def test_missing_store(self, tmp_path):
        with pytest.raises(StateError):
            ModelStore(tmp_path / "nothing").load()

    def test_catalog_mismatch(self, trained, tmp_path):
        ens, catalog = trained
        store = ModelStore(tmp_path)
        store.save(ens, catalog)
        _, users = load_fixture()
        other = catalog.__class__({k: v for k, v in list(catalog.items.items())[:-1]}, catalog.dim)
        from collab_ensemble.store import save_catalog

        save_catalog(store.catalog_path, other)
        with pytest.raises(StateError):
            store.load()


class TestAtomicWrite:
    def test_failed_write_keeps_old_file(self, trained, tmp_path, monkeypatch):
        ens, _ = trained
        p = tmp_path / "e.cel"
        save_ensemble(p, ens)
        before = p.read_bytes()

        def boom(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(OSError):
            save_ensemble(p, ens.without(ens.user_ids[0]))
        assert p.read_bytes() == before
        assert sorted(f.name for f in tmp_path.iterdir()) == ["e.cel"]
