#!/usr/bin/env python3
"""Smoke test for the hdlv_py extension module.

Builds the cdylib if needed, stages it under a temp directory with the
importable name, and exercises lint, hierarchy checking, simulation, the
reference PWM model, VCD round-tripping, and the prompt helpers.

Usage: python3 python/smoke_test.py [--release]
"""

import json
import pathlib
import shutil
import subprocess
import sys
import sysconfig
import tempfile

REPO = pathlib.Path(__file__).resolve().parent.parent


def build_and_import(release: bool):
    profile = "release" if release else "debug"
    cmd = ["cargo", "build", "-p", "hdlv-py"]
    if release:
        cmd.append("--release")
    subprocess.run(cmd, cwd=REPO, check=True)

    built = REPO / "target" / profile / "libhdlv_py.so"
    if not built.exists():  # macOS fallback
        built = REPO / "target" / profile / "libhdlv_py.dylib"
    if not built.exists():
        sys.exit(f"extension library not found under target/{profile}")

    stage = pathlib.Path(tempfile.mkdtemp(prefix="hdlv_py_"))
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy2(built, stage / f"hdlv_py{suffix}")
    sys.path.insert(0, str(stage))
    import hdlv_py

    return hdlv_py


def read(rel):
    return (REPO / rel).read_text()


def corpus_sources():
    pwm_dir = REPO / "corpus" / "pwm"
    return [(p.name, p.read_text()) for p in sorted(pwm_dir.glob("*.v"))]


def main():
    release = "--release" in sys.argv[1:]
    hdlv = build_and_import(release)
    print(f"hdlv_py {hdlv.__version__}")

    # Lint: the begin/} snippet must yield LLM001 at line 2 column 1.
    diags = hdlv.lint([("listing1.v", read("corpus/listings/listing1.v"))])
    llm001 = [d for d in diags if d["rule"] == "LLM001"]
    assert len(llm001) == 1, diags
    assert llm001[0]["start"] == {"line": 2, "col": 1}, llm001
    print("lint: LLM001 detected at 2:1")

    # The reference corpus lints clean.
    assert hdlv.lint(corpus_sources()) == []
    print("lint: corpus clean")

    # Hierarchy conformance of the shipped corpus.
    report = hdlv.hier_check(read("corpus/pwm/pwm.manifest.json"), corpus_sources())
    assert report["pass"], report
    print("hier_check: corpus conforms")

    # Golden model: steady-state counts at duty 64.
    trace = hdlv.golden_trace(64, cycles=2048)
    window = range(1024, 1280)
    main_high = sum((trace["pwm"][t] >> 0) & 1 for t in window)
    comp_high = sum((trace["pwm_n"][t] >> 0) & 1 for t in window)
    assert main_high == 60, main_high
    assert comp_high == 188, comp_high
    print("golden_trace: duty 64 counts 60/188 per period")

    # Simulator vs reference, bit-exact.
    mism = hdlv.verify_pwm(
        corpus_sources(),
        [0, 64, 128, 192],
        cycles=1024,
        counter_map=[("c1", "u_cnt1.count"), ("c2", "u_cnt2.count"), ("c3", "u_cnt3.count")],
    )
    assert mism == [], mism
    print("verify_pwm: corpus bit-exact on 4 duties")

    # Direct simulation with a stimulus.
    stim = json.dumps(
        {"reset_cycles": 4, "writes": [{"signal": "en", "cycle": 0, "value": 1},
                                       {"signal": "duty", "cycle": 0, "value": 128}]}
    )
    sim = hdlv.simulate(corpus_sources(), "pwm_top", 300, stimulus_json=stim,
                        record=["u_cnt1.count", "pwm"])
    assert sim["u_cnt1.count"][100] == (100 - 4 + 1) % 256
    print("simulate: counter tracks cycles after reset release")

    # Stepping model object.
    model = hdlv.PwmModel()
    for _ in range(300):
        pwm, pwm_n = model.step(128)
        assert not any(a and b for a, b in zip(pwm, pwm_n))
    c1, c2, c3 = model.counters()
    assert (c1 - c2) % 256 == 85 and (c1 - c3) % 256 == 170, (c1, c2, c3)
    print("PwmModel: phases locked at 85/170 and outputs never overlap")

    # VCD round trip.
    text = hdlv.to_vcd([("a", [0, 1, 1, 0]), ("b", [3, 3, 2, 1])], [1, 4])
    back = hdlv.from_vcd(text)
    assert back == {"a": [0, 1, 1, 0], "b": [3, 3, 2, 1]}, back
    print("vcd: round trip exact")

    # Prompt and extraction helpers.
    prompt = hdlv.build_prompt(read("corpus/pwm/pwm.manifest.json"), "up_counter",
                               feedback=["x.v:1:1: error[LLM001] begin closed with `}`"])
    assert "up_counter" in prompt and "LLM001" in prompt
    units = hdlv.extract_code("notes\n```verilog\nmodule m; endmodule\n```\n")
    assert len(units) == 1 and "module m" in units[0]
    print("prompt/extract: ok")

    print("smoke test OK")


if __name__ == "__main__":
    main()
