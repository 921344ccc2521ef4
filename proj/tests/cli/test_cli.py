"""End-to-end checks of the sht command-line tool on a tiny configuration."""

import json
import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import cv2

SHT = Path(sys.argv[1])
CONFIG = Path(sys.argv[2])

TINY = {
    "num_stacks": "2",
    "pose_channels": "16",
    "sr_channels": "8",
    "sr_blocks_per_module": "2",
    "hourglass_depth": "2",
    "hourglass_skip_residuals": "1",
    "fptn_channels": "4",
    "fptn_blocks": "2",
    "disc_channels": "8",
}

failures = []


def run(*args, expect=0, env=None):
    proc = subprocess.run([str(SHT), *map(str, args)], capture_output=True, text=True, env=env)
    if proc.returncode != expect:
        failures.append(f"{' '.join(map(str, args))}: exit {proc.returncode}, expected {expect}\n{proc.stderr}")
    return proc


def check(cond, what):
    if not cond:
        failures.append(what)


def main():
    root = Path(tempfile.mkdtemp(prefix="sht_cli_"))
    try:
        lines = []
        for line in CONFIG.read_text().splitlines():
            key = line.split("=")[0].strip()
            lines.append(f"{key} = {TINY[key]}" if key in TINY else line)
        cfg = root / "tiny.cfg"
        cfg.write_text("\n".join(lines) + "\n")

        data, small = root / "data", root / "small"
        run("make-toy-data", "--output", data, "--count", 8, "--seed", 3)
        run("make-toy-data", "--output", data, "--count", 8, "--seed", 3, expect=1)
        run("make-toy-data", "--output", data, "--count", 8, "--seed", 3, "--force")
        run("make-toy-data", "--output", small, "--count", 2, "--canvas", 64, "--seed", 4)
        check(len(list(data.glob("*.png"))) == 8, "toy dataset image count")

        ckpt, log = root / "dhln.ckpt", root / "dhln.jsonl"
        run("train", "--config", cfg, "--phase", "pretrain_dhln", "--steps", 3, "--data", data,
            "--checkpoint", ckpt, "--log", log)
        check(ckpt.exists() and log.exists(), "train writes checkpoint and log")
        check(Path(str(ckpt) + ".manifest.json").exists(), "train writes a manifest")
        check(len(log.read_text().splitlines()) == 3, "one log record per step")
        run("train", "--config", cfg, "--phase", "pretrain_dhln", "--steps", 3, "--data", data,
            "--checkpoint", ckpt, expect=1)

        logs = []
        for i in range(2):
            out = root / f"seed{i}.jsonl"
            run("train", "--config", cfg, "--phase", "pretrain_dhln", "--steps", 2, "--data", data,
                "--checkpoint", root / f"seed{i}.ckpt", "--log", out, "--seed", 7)
            logs.append(out.read_text())
        check(logs[0] == logs[1] and logs[0], "same seed gives identical metrics logs")

        proc = run("train", "--config", cfg, "--phase", "finetune_sht", "--steps", 1, "--data", data,
                   "--checkpoint", root / "ft.ckpt", expect=1)
        check("PhaseViolation" in proc.stderr, "finetune without pretraining names PhaseViolation")

        env = dict(os.environ, SHT_CONFIG=str(cfg))
        run("train", "--phase", "pretrain_dhln", "--steps", 1, "--data", data, "--checkpoint", root / "env.ckpt",
            env=env)
        run("train", "--config", cfg, "--set", "no_such_key=1", "--phase", "pretrain_dhln", "--steps", 1,
            "--data", data, "--checkpoint", root / "bad.ckpt", expect=1)

        report, ced = root / "report.json", root / "ced.txt"
        run("eval", "--checkpoint", ckpt, "--data", data, "--nme", "io", "--auc-threshold", 0.1,
            "--fr-threshold", 0.1, "--report", report, "--ced", ced)
        rep = json.loads(report.read_text())
        check(len(rep["images"]) == 8 and rep["nme"] > 0, "eval report covers every face")
        check(ced.exists(), "eval writes the CED curve")

        perfect = root / "perfect.json"
        run("eval", "--predictions", data, "--config", cfg, "--data", data, "--report", perfect)
        rep = json.loads(perfect.read_text())
        check(rep["nme"] == 0 and rep["auc"] == 1 and rep["fr"] == 0, f"ground-truth predictions score perfectly: {rep}")
        run("eval", "--checkpoint", ckpt, "--data", root / "missing", expect=2)

        det = root / "det"
        run("detect", "--checkpoint", ckpt, "--input", data, "--output", det)
        check(sorted(p.stem for p in det.glob("*.txt")) == sorted(p.stem for p in data.glob("*.png")),
              "detect writes one landmark file per input")
        run("eval", "--predictions", det, "--config", cfg, "--data", data, "--report", root / "det.json",
            "--no-quality")
        run("detect", "--checkpoint", ckpt, "--input", root / "nothing.png", "--output", det, expect=2)

        hal = root / "hal"
        one = sorted(small.glob("*.png"))[0]
        run("hallucinate", "--checkpoint", ckpt, "--input", one, "--output", hal)
        img = cv2.imread(str(hal / one.name))
        check(img is not None and img.shape == (128, 128, 3), "64×64 input hallucinates to 128×128")
        run("hallucinate", "--checkpoint", ckpt, "--input", one, "--output", root / "hal256", "--config", cfg,
            "--set", "sr_output_size=256", expect=1)

        target = sorted(p for p in data.glob("*.txt") if p.name != "bboxes.txt")[0]
        condition = data / (target.stem + ".png")
        run("transfer", "--checkpoint", ckpt, "--condition", condition, "--target-landmarks", target,
            "--output", root / "t0.png", expect=1)
        full = root / "full.ckpt"
        run("train", "--config", cfg, "--phase", "pretrain_dhln", "pretrain_fptn", "--steps", 2, "--data", data,
            "--checkpoint", full)
        run("transfer", "--checkpoint", full, "--condition", condition, "--target-landmarks", target,
            "--output", root / "t1.png")
        img = cv2.imread(str(root / "t1.png"))
        check(img is not None and img.shape == (128, 128, 3), "transfer writes an SR-sized face")
        run("transfer", "--checkpoint", full, "--condition", condition, "--target-image", condition,
            "--output", root / "t2.png")

        pts = root / "face.pts"
        pts.write_text("version: 1\nn_points: 2\n{\n10.5 20.25\n30 40\n}\n")
        run("convert-pts", "--input", pts, "--output", root / "face.txt")
        vals = [[float(v) for v in l.split()] for l in (root / "face.txt").read_text().splitlines()]
        check(vals == [[10.5, 20.25], [30.0, 40.0]], "convert-pts keeps coordinates")
    finally:
        shutil.rmtree(root, ignore_errors=True)

    for f in failures:
        print("FAIL:", f)
    print("cli: %d failure(s)" % len(failures))
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
