from __future__ import annotations

import asyncio
import json

import numpy as np
import pytest

from lib.storage import ResultStorage, encode_csv, encode_json, format_csv_value


def test_generate_result_id_does_not_create_placeholder_file(tmp_path) -> None:
    storage = ResultStorage(str(tmp_path))

    result_id = asyncio.run(storage.generate_result_id("dos/grid"))

    assert result_id == "dosgrid-001"
    assert not (tmp_path / f"{result_id}.json").exists()


def test_result_ids_increase_per_base(tmp_path) -> None:
    storage = ResultStorage(str(tmp_path))

    first = asyncio.run(storage.save_result("solve", {"value": 1}))
    second = asyncio.run(storage.save_result("solve", {"value": 2}))
    other = asyncio.run(storage.save_result("dos", {"value": 3}))

    assert [first["resultId"], second["resultId"], other["resultId"]] == ["solve-001", "solve-002", "dos-001"]


def test_write_prevents_overwrite_when_disabled(tmp_path) -> None:
    storage = ResultStorage(str(tmp_path))
    path = tmp_path / "solve-001.json"

    asyncio.run(storage.write_json(path, {"value": 1}, allow_overwrite=False))

    with pytest.raises(FileExistsError):
        asyncio.run(storage.write_json(path, {"value": 2}, allow_overwrite=False))

    assert json.loads(path.read_text(encoding="utf-8"))["value"] == 1


def test_write_allows_explicit_overwrite(tmp_path) -> None:
    storage = ResultStorage(str(tmp_path))
    path = tmp_path / "solve-001.json"

    asyncio.run(storage.write_json(path, {"value": 1}, allow_overwrite=False))
    asyncio.run(storage.write_json(path, {"value": 2}, allow_overwrite=True))

    assert json.loads(path.read_text(encoding="utf-8"))["value"] == 2


def test_save_result_writes_json_and_csv(tmp_path) -> None:
    storage = ResultStorage(str(tmp_path))

    saved = asyncio.run(
        storage.save_result("dos", {"config": {"command": "dos"}}, ("E", "rho"), [(0.0, 0.25), (0.5, 1 / 3)])
    )

    document = json.loads((tmp_path / "dos-001.json").read_text(encoding="utf-8"))
    assert document["resultId"] == "dos-001"
    assert document["timestamp"]
    lines = (tmp_path / "dos-001.csv").read_text(encoding="utf-8").splitlines()
    assert lines == ["E,rho", "0,0.25", "0.5,0.33333333333333331"]
    assert saved["csv"].endswith("dos-001.csv")


def test_json_encoding_handles_numpy_and_complex_values() -> None:
    payload = {"rho": np.float64(0.5), "grid": np.arange(3), "z": 1 + 2j, "ok": np.bool_(True)}

    decoded = json.loads(encode_json(payload))

    assert decoded == {"rho": 0.5, "grid": [0, 1, 2], "z": [1.0, 2.0], "ok": True}


def test_csv_values_round_trip_exactly() -> None:
    assert format_csv_value(0.1) == "0.10000000000000001"
    assert float(format_csv_value(0.1)) == 0.1
    assert format_csv_value(True) == "true"
    assert format_csv_value(7) == "7"
    assert encode_csv(("k",), [(1,)]).decode("utf-8").splitlines() == ["k", "1"]
