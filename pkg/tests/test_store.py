"""Run store: ids, manifests, atomic persistence, crash recovery."""

import os

import pytest

from nvlab.kinds import MeasurementKind
from nvlab.measurements import run_measurement
from nvlab.store import (
    DATA_DIR_ENV,
    STATUS_DONE,
    STATUS_FAILED,
    STATUS_RUNNING,
    RunManifest,
    RunStore,
    new_run_id,
    resolve_data_dir,
)

from conftest import demo_config


def small_result(bench_params):
    cfg = demo_config(MeasurementKind.PL_INTENSITY).with_entries(inner_reps=5)
    return run_measurement(MeasurementKind.PL_INTENSITY, cfg, bench_params, seed=3)


class TestRunIds:
    def test_ids_are_26_chars_and_unique(self):
        ids = {new_run_id() for _ in range(200)}
        assert len(ids) == 200
        assert all(len(i) == 26 for i in ids)

    def test_ids_sort_by_creation_time(self):
        early = new_run_id(now_ms=1_700_000_000_000)
        late = new_run_id(now_ms=1_700_000_000_001)
        assert early < late

    def test_id_alphabet_has_no_ambiguous_glyphs(self):
        run_id = new_run_id()
        assert not set(run_id) & set("ILOU")


class TestManifestText:
    def test_round_trip(self):
        manifest = RunManifest(
            run_id="01ABC", kind="rabi", seed=7, mode="photon",
            status=STATUS_DONE, started="2026-08-14T00:00:00+00:00",
            finished="2026-08-14T00:01:00+00:00", error="",
            result_path="runs/01ABC/result",
            config_text="mw_freq = 2.82 GHz\n",
            physics_text="contrast = 0.3\n",
        )
        assert RunManifest.from_text(manifest.to_text()) == manifest

    def test_multiline_error_is_flattened(self):
        manifest = RunManifest(
            run_id="x", kind="rabi", seed=0, mode="photon",
            status=STATUS_FAILED, error="boom\n  at line 3",
        )
        back = RunManifest.from_text(manifest.to_text())
        assert back.error == "boom /   at line 3"

    def test_empty_sections_round_trip_empty(self):
        manifest = RunManifest(run_id="x", kind="t1", seed=0, mode="photon",
                               status=STATUS_RUNNING)
        back = RunManifest.from_text(manifest.to_text())
        assert back.config_text == ""
        assert back.physics_text == ""


class TestStoreLifecycle:
    def test_create_finish_load(self, tmp_path, bench_params):
        store = RunStore(tmp_path)
        manifest = store.create_run(MeasurementKind.PL_INTENSITY, seed=3,
                                    mode="photon", config_text="laser_time = 1 us\n")
        assert manifest.status == STATUS_RUNNING
        assert manifest.started != ""

        result = small_result(bench_params)
        done = store.finish_run(manifest, result)
        assert done.status == STATUS_DONE
        assert done.finished != ""

        assert store.load_manifest(manifest.run_id) == done
        loaded = store.load_result(manifest.run_id)
        assert loaded.signal == result.signal
        assert loaded.records == result.records

    def test_manifest_snapshots_config_and_physics(self, tmp_path):
        store = RunStore(tmp_path)
        manifest = store.create_run(
            MeasurementKind.RABI, seed=1, mode="photon",
            config_text="mw_freq = 2.82 GHz\n", physics_text="contrast = 0.3\n",
        )
        back = store.load_manifest(manifest.run_id)
        assert back.config_text == "mw_freq = 2.82 GHz\n"
        assert back.physics_text == "contrast = 0.3\n"

    def test_fail_run_records_the_error(self, tmp_path):
        store = RunStore(tmp_path)
        manifest = store.create_run(MeasurementKind.T1, seed=0, mode="photon")
        failed = store.fail_run(manifest, "laser interlock tripped")
        assert failed.status == STATUS_FAILED
        assert store.load_manifest(manifest.run_id).error == "laser interlock tripped"

    def test_status_never_moves_backwards(self, tmp_path, bench_params):
        store = RunStore(tmp_path)
        manifest = store.create_run(MeasurementKind.PL_INTENSITY, seed=3, mode="photon")
        done = store.finish_run(manifest, small_result(bench_params))
        with pytest.raises(ValueError):
            store.fail_run(done, "too late")
        # and the only files present are complete ones
        run_dir = store.runs_dir / manifest.run_id
        assert sorted(p.name for p in run_dir.iterdir()) == ["manifest", "result"]

    def test_list_runs_sorts_by_id(self, tmp_path):
        store = RunStore(tmp_path)
        created = [
            store.create_run(MeasurementKind.ODMR, seed=i, mode="photon")
            for i in range(3)
        ]
        listed = store.list_runs()
        assert [m.run_id for m in listed] == sorted(m.run_id for m in created)
        assert {m.seed for m in listed} == {0, 1, 2}

    def test_missing_run_raises(self, tmp_path):
        store = RunStore(tmp_path)
        with pytest.raises(FileNotFoundError):
            store.load_manifest("nope")
        with pytest.raises(FileNotFoundError):
            store.load_result("nope")

    def test_result_before_finish_raises(self, tmp_path):
        store = RunStore(tmp_path)
        manifest = store.create_run(MeasurementKind.ODMR, seed=0, mode="photon")
        with pytest.raises(FileNotFoundError):
            store.load_result(manifest.run_id)

    def test_no_temp_files_survive_a_write(self, tmp_path, bench_params):
        store = RunStore(tmp_path)
        manifest = store.create_run(MeasurementKind.PL_INTENSITY, seed=3, mode="photon")
        store.finish_run(manifest, small_result(bench_params))
        leftovers = [p for p in store.runs_dir.rglob("*.tmp")]
        assert leftovers == []


class TestRecovery:
    def test_interrupted_runs_are_failed_on_startup(self, tmp_path, bench_params):
        store = RunStore(tmp_path)
        dead = store.create_run(MeasurementKind.RABI, seed=1, mode="photon")
        finished = store.create_run(MeasurementKind.PL_INTENSITY, seed=2, mode="photon")
        store.finish_run(finished, small_result(bench_params))

        recovered = RunStore(tmp_path).recover_interrupted()
        assert [m.run_id for m in recovered] == [dead.run_id]
        assert store.load_manifest(dead.run_id).status == STATUS_FAILED
        assert "interrupted" in store.load_manifest(dead.run_id).error
        assert store.load_manifest(finished.run_id).status == STATUS_DONE

    def test_recovery_is_idempotent(self, tmp_path):
        store = RunStore(tmp_path)
        store.create_run(MeasurementKind.RABI, seed=1, mode="photon")
        assert len(RunStore(tmp_path).recover_interrupted()) == 1
        assert RunStore(tmp_path).recover_interrupted() == []


class TestDataDirResolution:
    def test_explicit_beats_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path / "from-env"))
        assert resolve_data_dir(tmp_path / "explicit") == tmp_path / "explicit"

    def test_environment_beats_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path / "from-env"))
        assert resolve_data_dir() == tmp_path / "from-env"

    def test_default_is_relative(self, monkeypatch):
        monkeypatch.delenv(DATA_DIR_ENV, raising=False)
        assert str(resolve_data_dir()) == "nvlab-data"
