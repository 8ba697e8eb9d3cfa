"""Session fixtures that produce real bundles and reference CSVs by driving
the writer's command line — the only supported surface between the two
packages."""

import subprocess
import sys

import pytest


def run_writer_cli(*args):
    """Invoke the bundle writer's CLI and fail loudly on a nonzero exit."""
    proc = subprocess.run(
        [sys.executable, "-m", "convinit.cli", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(
            f"writer CLI failed ({proc.returncode}): {' '.join(args)}\n{proc.stderr}"
        )
    return proc.stdout


@pytest.fixture(scope="session")
def small_bundles(tmp_path_factory):
    """A converged 1-layer 2-head bundle on a 4x4 grid, in both dtypes,
    plus CLI-dumped reference maps for every head."""
    root = tmp_path_factory.mktemp("small")
    flags = [
        "solve-init", "--grid", "4", "4", "--dim", "32", "--heads", "2",
        "--seed", "7", "--lr", "0.02", "--max-iter", "2000",
    ]
    f64 = root / "w64.bin"
    f32 = root / "w32.bin"
    run_writer_cli(*flags, "--out", str(f64))
    run_writer_cli(*flags, "--f32", "--out", str(f32))
    maps = {}
    for head in range(2):
        out = root / f"map_0_{head}.csv"
        run_writer_cli(
            "attn-map", "--bundle", str(f64), "--layer", "0",
            "--head", str(head), "--out", str(out),
        )
        maps[(0, head)] = out
    return {"f64": f64, "f32": f32, "maps": maps}


@pytest.fixture(scope="session")
def vit_bundle(tmp_path_factory):
    """A converged 2-layer 4-head bundle on an 8x8 grid for model patching."""
    out = tmp_path_factory.mktemp("vit") / "vit.bin"
    run_writer_cli(
        "solve-init", "--grid", "8", "8", "--dim", "64", "--heads", "4",
        "--layers", "2", "--sharing", "same", "--seed", "9",
        "--lr", "0.02", "--max-iter", "1500", "--out", str(out),
    )
    return out
