"""Figure-generation tests: smoothing arithmetic, spec validation, CSV error
handling, aggregation, rendering, CLI surface."""
import json

import numpy as np
import pandas as pd
import pytest

from plotkit import FigureSpec, compute_series, moving_average, presets, render
from plotkit.cli import main as cli_main
from plotkit.figures import preset_spec


class TestMovingAverage:
    def test_window_one_identity(self):
        v = [3.0, 1.0, 4.0, 1.0, 5.0]
        assert np.array_equal(moving_average(v, 1), v)

    def test_window_two_hand(self):
        got = moving_average([1.0, 2.0, 3.0, 4.0, 5.0], 2)
        assert np.array_equal(got, [1.0, 1.5, 2.5, 3.5, 4.5])

    def test_window_three_hand(self):
        got = moving_average([2.0, 4.0, 6.0, 8.0, 10.0], 3)
        assert np.array_equal(got, [2.0, 3.0, 4.0, 6.0, 8.0])

    def test_window_larger_than_series(self):
        # trailing partial means only
        got = moving_average([1.0, 2.0, 3.0, 4.0, 5.0], 10)
        assert np.array_equal(got, [1.0, 1.5, 2.0, 2.5, 3.0])

    def test_constant_series_fixed_point(self):
        got = moving_average(np.full(7, 4.2), 3)
        assert np.allclose(got, 4.2)

    def test_window_zero_rejected(self):
        with pytest.raises(ValueError):
            moving_average([1.0], 0)


def make_spec(tmp_path, **over):
    base = dict(name="t", inputs=[str(tmp_path / "in.csv")], kind="convergence",
                x="episode", y="reward", out=str(tmp_path / "t.png"))
    base.update(over)
    return FigureSpec(**base)


class TestSpecValidation:
    def test_bad_kind(self, tmp_path):
        with pytest.raises(ValueError, match="kind"):
            make_spec(tmp_path, kind="pie").validate()

    def test_window_below_one(self, tmp_path):
        with pytest.raises(ValueError, match="window"):
            make_spec(tmp_path, window=0).validate()

    def test_no_inputs(self, tmp_path):
        with pytest.raises(ValueError, match="input"):
            make_spec(tmp_path, inputs=[]).validate()

    def test_from_json_roundtrip(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(dict(
            name="t", inputs=["a.csv"], kind="sweep-line", x="sweep_value",
            y="u_large", out="t.png", window=3)))
        spec = FigureSpec.from_json(str(path))
        assert spec.window == 3 and spec.kind == "sweep-line"


def write_metrics(path, rows):
    header = "scheme,sweep_value,replication,episode,u_large,u_small_mean,switch_cost_total,violations"
    path.write_text(header + "\n" + "\n".join(rows) + ("\n" if rows else ""))


class TestCsvErrors:
    def test_missing_column_named(self, tmp_path):
        p = tmp_path / "in.csv"
        p.write_text("episode,scheme\n1,A\n")
        spec = make_spec(tmp_path, inputs=[str(p)])
        with pytest.raises(ValueError, match="'reward'"):
            render(spec)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "in.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            render(make_spec(tmp_path, inputs=[str(p)]))
        assert not (tmp_path / "t.png").exists()

    def test_header_only(self, tmp_path):
        p = tmp_path / "in.csv"
        p.write_text("scheme,episode,reward\n")
        with pytest.raises(ValueError, match="no rows"):
            render(make_spec(tmp_path, inputs=[str(p)]))


class TestComputeSeries:
    def test_mean_and_std_over_replications(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, [
            "A,0.0,0,0,10.0,1.0,0.0,0",
            "A,0.0,1,0,14.0,1.0,0.0,0",
            "A,0.0,0,1,20.0,1.0,0.0,0",
            "A,0.0,1,1,22.0,1.0,0.0,0",
        ])
        spec = make_spec(tmp_path, inputs=[str(p)], y="u_large")
        series = compute_series(spec, pd.read_csv(p))
        x, mean, std = series["A"]
        assert np.array_equal(x, [0.0, 1.0])
        assert np.array_equal(mean, [12.0, 21.0])
        assert np.allclose(std, [np.std([10, 14], ddof=1), np.std([20, 22], ddof=1)])

    def test_single_replication_zero_band(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, ["A,0.0,0,0,10.0,1.0,0.0,0", "A,0.0,0,1,20.0,1.0,0.0,0"])
        spec = make_spec(tmp_path, inputs=[str(p)], y="u_large")
        _, _, std = compute_series(spec, pd.read_csv(p))["A"]
        assert np.array_equal(std, [0.0, 0.0])

    def test_smoothing_applied_to_mean(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, [f"A,0.0,0,{e},{float(e)!r},1.0,0.0,0" for e in range(5)])
        spec = make_spec(tmp_path, inputs=[str(p)], y="u_large", window=2)
        _, mean, _ = compute_series(spec, pd.read_csv(p))["A"]
        assert np.array_equal(mean, [0.0, 0.5, 1.5, 2.5, 3.5])

    def test_sweep_line_groups_sorted(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, [
            "B,1.0,0,0,1.0,0.5,0.0,0",
            "A,1.0,0,0,2.0,0.7,0.0,0",
            "A,2.0,0,0,3.0,0.9,0.0,0",
        ])
        spec = make_spec(tmp_path, inputs=[str(p)], kind="sweep-line",
                         x="sweep_value", y="u_small_mean")
        series = compute_series(spec, pd.read_csv(p))
        assert list(series) == ["A", "B"]
        assert np.array_equal(series["A"][0], [1.0, 2.0])

    def test_idempotent(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, [f"A,0.0,{r},{e},{float(3 * r + e)!r},1.0,0.0,0"
                          for r in range(2) for e in range(4)])
        spec = make_spec(tmp_path, inputs=[str(p)], y="u_large", window=3)
        df = pd.read_csv(p)
        s1 = compute_series(spec, df)
        s2 = compute_series(spec, df)
        for k in s1:
            for a, b in zip(s1[k], s2[k]):
                assert np.array_equal(a, b)


class TestRender:
    def test_writes_image(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, [f"A,0.0,{r},{e},{float(e + r)!r},1.0,0.0,0"
                          for r in range(2) for e in range(6)])
        spec = make_spec(tmp_path, inputs=[str(p)], y="u_large", window=2)
        out = render(spec)
        assert out == spec.out
        with open(out, "rb") as fh:
            assert fh.read(8) == b"\x89PNG\r\n\x1a\n"

    def test_input_file_untouched(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, ["A,0.0,0,0,1.0,1.0,0.0,0"])
        before = p.read_bytes()
        render(make_spec(tmp_path, inputs=[str(p)], y="u_large"))
        assert p.read_bytes() == before


class TestPresets:
    def test_seven_presets(self):
        assert set(presets()) == {"fig4", "fig5", "fig6", "fig7", "fig8",
                                  "fig9", "fig_train"}

    def test_preset_spec_paths(self, tmp_path):
        spec = preset_spec("fig4", "/runs/a", str(tmp_path))
        assert spec.inputs == ["/runs/a/ga_trace.csv"]
        assert spec.out == str(tmp_path / "fig4.png")

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            preset_spec("fig99", ".", ".")


class TestCli:
    def test_spec_mode(self, tmp_path):
        p = tmp_path / "m.csv"
        write_metrics(p, ["A,0.0,0,0,1.0,1.0,0.0,0", "A,0.0,0,1,2.0,1.0,0.0,0"])
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(dict(
            name="t", inputs=[str(p)], kind="convergence", x="episode",
            y="u_large", out=str(tmp_path / "o.png"))))
        assert cli_main(["--spec", str(spec_file)]) == 0
        assert (tmp_path / "o.png").exists()

    def test_requires_one_mode(self):
        assert cli_main([]) == 2
        assert cli_main(["--spec", "a", "--preset", "fig4"]) == 2

    def test_missing_column_exit_code(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("a,b\n1,2\n")
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(dict(
            name="t", inputs=[str(p)], kind="convergence", x="episode",
            y="u_large", out=str(tmp_path / "o.png"))))
        assert cli_main(["--spec", str(spec_file)]) == 1
