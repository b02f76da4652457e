"""Smoke test for the Python extension and the stdio bridge.

Builds the extension and the CLI with cargo, imports the module from a
temporary directory, and checks it against the shared fixture files.

    python3 python/smoke_test.py
"""

import importlib.util
import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "crates" / "core" / "data"


def build():
    subprocess.run(["cargo", "build", "-q", "-p", "adaptrain-py", "-p", "adaptrain-cli"], cwd=ROOT, check=True)
    target = ROOT / "target" / "debug"
    lib = next(p for p in (target / "libadaptrain.so", target / "libadaptrain.dylib") if p.exists())
    return lib, target / "adaptrain"


def load(lib, tmp):
    dest = Path(tmp) / "adaptrain.so"
    shutil.copy(lib, dest)
    spec = importlib.util.spec_from_file_location("adaptrain", dest)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def reference_ap(scores, labels):
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    hits, total = 0, 0.0
    for rank, i in enumerate(order, start=1):
        if labels[i]:
            hits += 1
            total += hits / rank
    return total / hits


def check_ap(m):
    cases = json.loads((DATA / "ap_vectors.json").read_text())["cases"]
    for c in cases:
        scores = [float(s) for s in c["scores"]]
        labels = [bool(l) for l in c["labels"]]
        got = m.average_precision(scores, labels)
        assert got == c["ap"] == reference_ap(scores, labels), c["name"]
    assert m.average_precision([1.0, 2.0], [False, False]) is None
    print(f"ap: {len(cases)} vectors bit-exact")


def check_reward(m):
    assert abs(m.composite_reward(0.02, 1.0, 0.2, 0.35) - 1.11) < 1e-12
    assert m.composite_reward(0.0, 0.0, 0.0, 0.0) == 0.0
    print("reward: ok")


def check_surrogate(m):
    runs = []
    for _ in range(2):
        env = m.SyntheticTrainer("default")
        trace = [env.reset(5)]
        for _ in range(env.horizon):
            trace.append(env.execute("CutMix", "AdamW", "OneCycle", "Focal"))
        runs.append(trace)
    assert runs[0] == runs[1]
    first, last = json.loads(runs[0][0]), json.loads(runs[0][-1])
    assert last["map_val"] > first["map_val"]
    try:
        m.SyntheticTrainer("default").execute("Nope", "AdamW", "OneCycle", "Focal")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown strategy accepted")
    print(f"surrogate: mAP {first['map_val']:.3f} -> {last['map_val']:.3f}")


def check_train(m, tmp):
    summary = json.loads(m.train(json.dumps({"seed": 3, "steps": 5}), str(Path(tmp) / "run")))
    assert summary["steps"] == 5
    assert (Path(tmp) / "run" / "decisions.jsonl").read_text().count("\n") == 5
    print("train: ok")


def check_golden_session(m, cli):
    lines = (DATA / "bridge_golden.jsonl").read_text().splitlines()
    header = json.loads(lines[0])
    script = [json.loads(l) for l in lines[1:]]
    hello = json.loads(script[0]["line"])
    assert hello["protocol_version"] == m.protocol_version()
    assert hello["catalog_digest"] == m.catalog_digest()
    proc = subprocess.Popen(
        [str(cli), "serve", "--seed", str(header["seed"]), "--steps", str(header["steps"])],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
    )
    for entry in script:
        if entry["from"] == "trainer":
            proc.stdin.write(entry["line"] + "\n")
            proc.stdin.flush()
        else:
            got = proc.stdout.readline().rstrip("\n")
            assert got == entry["line"], (got, entry["line"])
    proc.stdin.close()
    assert proc.wait(timeout=30) == 0
    results = sum(1 for e in script if e["from"] == "trainer" and '"result"' in e["line"])
    print(f"bridge: golden transcript replayed ({results} steps)")


def main():
    lib, cli = build()
    with tempfile.TemporaryDirectory() as tmp:
        m = load(lib, tmp)
        check_ap(m)
        check_reward(m)
        check_surrogate(m)
        check_train(m, tmp)
        check_golden_session(m, cli)
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
