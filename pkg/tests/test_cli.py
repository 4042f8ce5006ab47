import json
import subprocess
import sys

import pytest

from upsample_lab import LayerSpec, build_stack
from upsample_lab import io as uio
from upsample_lab.cli import main
from upsample_lab.signal import white_noise


def data_files(d):
    return sorted(p for p in d.iterdir() if p.name != "manifest.json")


def check_manifest(d):
    m = json.loads((d / "manifest.json").read_text())
    assert {"tool", "version", "seed", "config_hash", "inputs", "outputs", "started_at", "finished_at"} <= set(m)
    for entry in m["outputs"]:
        assert uio.sha256_file(d / entry["path"]) == entry["sha256"]
    return m


def test_figure_fig3_vector(tmp_path):
    assert main(["figure", "fig3", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fig3_constant_vector.csv").read_text().strip() == "1.0,1.0,2.0,1.0,2.0,1.0,2.0,1.0,1.0"
    check_manifest(tmp_path)


@pytest.mark.parametrize("fig", ["fig2", "fig4", "fig5"])
def test_small_figures_emit_vectors(tmp_path, fig):
    assert main(["figure", fig, "--out", str(tmp_path), "--format", "csv"]) == 0
    assert list(tmp_path.glob(f"{fig}_*_vector.csv"))
    assert not list(tmp_path.glob("*.pgm"))


def test_figure_fig6_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["figure", "fig6", "--seed", "7", "--out", str(a)]) == 0
    assert main(["figure", "fig6", "--seed", "7", "--out", str(b), "--jobs", "3"]) == 0
    fa, fb = data_files(a), data_files(b)
    assert [p.name for p in fa] == [p.name for p in fb]
    assert all(x.read_bytes() == y.read_bytes() for x, y in zip(fa, fb))
    report = json.loads((a / "fig6_report.json").read_text())
    assert report["variants"]["nearest_synthetic_music"]["input"] == "synthetic_music"


def test_figure_fig8_tones(tmp_path):
    assert main(["figure", "fig8", "--out", str(tmp_path), "--format", "pgm"]) == 0
    rep = json.loads((tmp_path / "fig8_report.json").read_text())["variants"]["transposed_ones"]["layers"]
    assert all(rep[f"layer{k}"]["report"]["verdicts"]["tonal"] for k in (1, 2, 3))
    preds = rep["layer3"]["report"]["predictions"]
    assert [p["frequency_hz"] for p in preds] == [4000.0, 8000.0, 12000.0, 16000.0]
    assert all(p["matched"] for p in preds)
    assert len(list(tmp_path.glob("fig8_transposed_ones_layer*.pgm"))) == 4


def test_figure_fig10_frame_counts(tmp_path):
    assert main(["figure", "fig10", "--out", str(tmp_path)]) == 0
    v = json.loads((tmp_path / "fig10_report.json").read_text())["variants"]
    f = v["center_false"]["layers"]["layer0"]["frames"]
    t = v["center_true"]["layers"]["layer0"]["frames"]
    assert (f, t) == ((8192 - 2048) // 512 + 1, 8192 // 512 + 1)


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("UPSAMPLE_LAB_SEED", "11")
    assert main(["figure", "fig2", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "manifest.json").read_text())["seed"] == 11
    monkeypatch.setenv("UPSAMPLE_LAB_SEED", "eleven")
    assert main(["figure", "fig2", "--out", str(tmp_path)]) == 1


def write_inputs(tmp_path, specs, offset=0.0):
    wav = tmp_path / "in.wav"
    uio.write_wav(wav, white_noise(16384, 4000, 1, offset=offset, scale=0.25), "float32")
    stack = tmp_path / "stack.json"
    uio.save_stack(stack, build_stack(specs, 4000, 0), seed=0)
    return wav, stack


def test_analyze_nearest_is_filtering_only(tmp_path):
    wav, stack = write_inputs(tmp_path, [LayerSpec("NearestUpsample", factor=2)])
    assert main(["analyze", str(wav), str(stack), "--out", str(tmp_path / "o")]) == 0
    v = json.loads((tmp_path / "o" / "report.json").read_text())["verdicts"]
    assert v == {"tonal": False, "filtering": True}
    check_manifest(tmp_path / "o")


def test_analyze_transposed_is_tonal(tmp_path):
    wav, stack = write_inputs(tmp_path, [LayerSpec("TransposedConv", length=8, stride=4)] * 3, offset=0.25)
    out = tmp_path / "o"
    assert main(["analyze", str(wav), str(stack), "--out", str(out), "--spectrograms"]) == 2
    assert json.loads((out / "report.json").read_text())["verdicts"]["tonal"] is True
    assert (out / "layer3.csv").exists() and (out / "layer3.pgm").exists()


def test_analyze_empty_stack(tmp_path):
    wav, stack = write_inputs(tmp_path, [])
    assert main(["analyze", str(wav), str(stack), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["predictions"] == [] and rep["peaks"] == []


def test_analyze_errors(tmp_path):
    wav, stack = write_inputs(tmp_path, [])
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["analyze", str(wav), str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 1
    (tmp_path / "bad.wav").write_bytes(b"RIFF0000")
    assert main(["analyze", str(tmp_path / "bad.wav"), str(stack), "--out", str(tmp_path / "o")]) == 1
    assert main(["analyze", str(wav), str(stack), "--channel", "3", "--out", str(tmp_path / "o")]) == 1
    other = tmp_path / "other.json"
    uio.save_stack(other, build_stack([], 8000))
    assert main(["analyze", str(wav), str(other), "--out", str(tmp_path / "o")]) == 1


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["figure", "fig1"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["experiment", "nope"])
    assert err.value.code == 1


def test_experiment_offset(tmp_path):
    assert main(["experiment", "offset", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "offset_report.json").read_text())
    assert rep["median_offset_delta_db"] >= 10 and rep["verdict_flips"] >= 18
    assert (tmp_path / "offset_deltas.csv").read_text().startswith("seed,offset_delta_db")
    check_manifest(tmp_path)


def test_experiment_gradient_control(tmp_path):
    assert main(["experiment", "gradient", "--stride", "1", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "gradient_report.json").read_text())
    assert rep["stride_peaks"] == 0 and rep["predicted"] == []
    assert (tmp_path / "gradient_spectrogram.pgm").exists()


def test_experiment_training_steps_zero(tmp_path):
    assert main(["experiment", "training", "--steps", "0", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "training_report.json").read_text())
    assert rep["pre_report"] == rep["post_report"]
    assert (tmp_path / "loss_curve.csv").read_text().splitlines()[0] == "step,loss"
    stack = uio.load_stack(tmp_path / "trained_stack.json")
    assert stack.output_rate == 64000


def test_experiment_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seeds": 2, "layers": 2}))
    assert main(["experiment", "offset", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "offset_report.json").read_text())
    assert rep["n_seeds"] == 2
    m = check_manifest(tmp_path / "o")
    assert m["inputs"][0]["sha256"] == uio.sha256_file(cfg)
    cfg.write_text(json.dumps({"sedes": 2}))
    assert main(["experiment", "offset", str(cfg), "--out", str(tmp_path / "p")]) == 1


def test_console_script_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "upsample_lab.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "upsample-lab" in res.stdout
