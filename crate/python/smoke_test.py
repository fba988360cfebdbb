"""Smoke test for the nazone Python extension.

Build and install first:

    pip install maturin
    maturin build --release -m crates/py/Cargo.toml -o dist
    pip install dist/nazone-*.whl
"""

import nazone


def main():
    arch = nazone.Architecture.default()
    assert arch.pair_capacity == 306
    assert 180.0 <= arch.move_time(200.0) <= 300.0

    c = nazone.Circuit(4)
    c.gate("h", 0)
    c.cz(0, 1)
    c.cz(2, 3)
    c.cz(1, 2)
    c.gate("rz", 3, [0.5])
    assert c.layers() == [[(0, 1), (2, 3)], [(1, 2)]]

    for routing in ("strict", "relaxed", "auto"):
        out = nazone.compile(c, arch, strategy="ids", routing=routing)
        assert out.cz_layers == 2
        assert out.instructions.count("RYDBERG") == 2
        assert "[totals]" in out.stats
        assert nazone.validate(out.instructions, arch) == []

    ghost = (
        "@0 INIT atoms=[(0,111),(4,115),(4,111)]\n"
        "@0 PICKUP rows=[111,115] cols=[0,4]\n"
        "@15 MOVE map=[(0,111)->(1,0),(4,115)->(3,10)]\n"
        "@300 DROP cols=[1,3]\n"
    )
    assert [v[1] for v in nazone.validate(ghost)] == ["ghost_spot"]

    steps, time_us, modes = nazone.route([((0.0, 100.0), (0.0, 0.0)), ((4.0, 100.0), (2.0, 0.0))], mode="strict")
    assert steps == 1 and modes == ["strict"] and time_us > 0

    g = nazone.generate("graphstate-like", 40, 10, 3, seed=1)
    assert max(len(layer) for layer in g.layers()) == 10

    wide = nazone.Circuit(620)
    for i in range(307):
        wide.cz(2 * i, 2 * i + 1)
    try:
        nazone.compile(wide)
    except RuntimeError as e:
        assert "306" in str(e)
    else:
        raise AssertionError("capacity error expected")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
