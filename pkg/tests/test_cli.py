import io
import json
import math

import numpy as np
import pytest

from planar_morse.cache import CacheKey, ResultCache, default_tolerances
from planar_morse.cli import run
from planar_morse.errors import InputError
from planar_morse.serialize import csv_text, dumps, jsonable, loads


def invoke(tmp_path, *argv, env=None):
    buf = io.StringIO()
    code = run([*argv, "--out", str(tmp_path / "out"), "--cache-dir", str(tmp_path / "cache")], stdout=buf)
    return code, buf.getvalue()


def artifacts(tmp_path):
    out = tmp_path / "out"
    return {p.name: p.read_bytes() for p in sorted(out.glob("*")) if p.name != "manifests.jsonl"}


def manifests(tmp_path):
    return [json.loads(x) for x in (tmp_path / "out" / "manifests.jsonl").read_text().splitlines()]


def test_json_roundtrip_is_byte_identical():
    obj = {"b": [1.0, 0.1, 1e-300, -2.5e17, np.float64(1 / 3)], "a": (np.int64(3), np.bool_(True)),
           "c": {"x": float("inf"), "y": float("nan")}, "d": np.arange(3.0)}
    text = dumps(obj)
    assert text.endswith("\n")
    assert dumps(loads(text)) == text
    assert loads(text)["c"] == {"x": "inf", "y": "nan"}
    assert list(loads(text)) == ["a", "b", "c", "d"]


def test_csv_format():
    text = csv_text(["p", "ok", "v"], [[0.1, True, None], [1 / 3, False, 2]])
    assert "\r" not in text
    lines = text.split("\n")
    assert lines[1] == "0.10000000000000001,true,"
    assert float(lines[2].split(",")[0]) == 1 / 3


def test_cache_key_is_canonical():
    a = CacheKey("sweep", {"m": 1, "p": [5.0, 10.0]})
    b = CacheKey("sweep", {"p": [5.0, 10.0], "m": 1})
    assert a.digest == b.digest and len(a.short) == 16
    assert a.digest != CacheKey("sweep", {"m": 2, "p": [5.0, 10.0]}).digest


def test_result_cache_roundtrip(tmp_path):
    cache = ResultCache(tmp_path)
    key = CacheKey("theta", {"imax": 1})
    assert cache.get(key) is None
    cache.put(key, "{}\n")
    assert cache.get(key) == "{}\n"
    assert ResultCache(tmp_path, enabled=False).get(key) is None


def test_tolerance_env():
    assert default_tolerances({}) == {"ode_rel_tol": 1e-13, "ode_abs_tol": 1e-16, "nu_tol": 1e-9}
    assert default_tolerances({"PLANAR_MORSE_NU_TOL": "1e-8"})["nu_tol"] == 1e-8
    for bad in ("abc", "-1", "0"):
        with pytest.raises(InputError):
            default_tolerances({"PLANAR_MORSE_ODE_RTOL": bad})


def test_theta_command(tmp_path):
    code, out = invoke(tmp_path, "theta", "--imax", "0", "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 1 and rows[0]["theta"] == 2.0 and rows[0]["i"] == 0


def test_theta_csv_and_manifest(tmp_path):
    code, _ = invoke(tmp_path, "theta", "--imax", "3", "--format", "csv")
    assert code == 0
    files = artifacts(tmp_path)
    (js,) = [n for n in files if n.endswith(".json")]
    payload = json.loads(files[js])
    (man,) = manifests(tmp_path)
    assert man["manifest_id"] == payload["manifest_id"] and man["cache_hit"] is False
    assert js in man["artifacts"]
    assert man["status"]["ok"] is True


def test_bad_input_exit_code(tmp_path, capsys):
    code, _ = invoke(tmp_path, "solve", "--p", "0.5", "--m", "2")
    assert code == 2
    assert "InputError" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        invoke(tmp_path, "solve", "--m", "2")
    assert exc.value.code == 2


def test_bad_env_tolerance_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("PLANAR_MORSE_ODE_RTOL", "nope")
    code, _ = invoke(tmp_path, "theta", "--imax", "1")
    assert code == 2


def test_repeat_is_cache_hit_with_identical_artifacts(tmp_path):
    args = ("spectrum", "--p", "3", "--m", "2", "--format", "json")
    code1, out1 = invoke(tmp_path, *args)
    first = artifacts(tmp_path)
    code2, out2 = invoke(tmp_path, *args)
    assert code1 == code2 == 0 and out1 == out2
    assert artifacts(tmp_path) == first
    hits = [m["cache_hit"] for m in manifests(tmp_path)]
    assert hits == [False, True]


def test_no_cache_recomputes_identically(tmp_path):
    args = ("morse", "--p", "5", "--m", "2")
    invoke(tmp_path, *args)
    first = artifacts(tmp_path)
    invoke(tmp_path, *args, "--no-cache")
    assert artifacts(tmp_path) == first
    assert [m["cache_hit"] for m in manifests(tmp_path)] == [False, False]


def test_morse_asymptotic(tmp_path):
    code, out = invoke(tmp_path, "morse", "--m", "3", "--asymptotic", "--format", "json")
    assert code == 0
    assert "31" in out


def test_alphas_command(tmp_path):
    code, out = invoke(tmp_path, "alphas", "--imax", "1", "--n", "8", "--format", "json")
    assert code == 0
    (js,) = [n for n in artifacts(tmp_path) if n.endswith(".json")]
    res = json.loads(artifacts(tmp_path)[js])["result"]
    (row,) = res["rows"]
    assert len(row["alphas"]) == 3 and all(v > 0 for v in row["alphas"])
    assert row["alphas"] == sorted(row["alphas"])


def test_sweep_independent_of_jobs(tmp_path):
    base = ("sweep", "--m", "1", "--p-grid", "5,10,20", "--no-cache")
    invoke(tmp_path / "a", *base, "--jobs", "1")
    invoke(tmp_path / "b", *base, "--jobs", "3")
    assert artifacts(tmp_path / "a") == artifacts(tmp_path / "b")


def test_jsonable_dataclass_and_nonfinite():
    from planar_morse.theta import theta_sequence

    d = jsonable(theta_sequence(1))
    assert isinstance(d, dict)
    assert jsonable(-math.inf) == "-inf"
