import os

import numpy as np
import pytest

from app.core.task_tracker import RunTracker
from app.core.workers import run_chunks, split_bands
from app.models.orbits import Classification
from app.services.outputs import (
    ESCAPE_DARKEST,
    FIXED_LEVEL,
    RETURNING_LEVEL,
    OutputWriter,
    escape_levels,
    fmt,
    grid_colors,
    grid_pixels,
)


def test_grid_pixels_put_top_edge_first(synthetic_grid):
    grid = synthetic_grid({(0, 0): Classification.RETURNING, (6, 6): Classification.ESCAPING})
    grid.escape_iteration[6, 6] = 1
    pixels = grid_pixels(grid)
    assert pixels.dtype == np.uint8
    assert pixels[6, 0] == RETURNING_LEVEL
    assert pixels[0, 6] == 255
    assert pixels[3, 3] == FIXED_LEVEL
    assert grid_colors(grid).shape == (7, 7, 3)


def test_escape_levels_darken_with_time():
    levels = escape_levels(np.array([1, 10, 100, 10_000]), 10_000)
    assert levels[0] == 255
    assert levels[-1] == ESCAPE_DARKEST
    assert np.all(np.diff(levels.astype(int)) <= 0)


def test_fmt_round_trips():
    assert float(fmt(0.1)) == 0.1
    assert fmt(3) == "3.0"


def test_writer_digest_and_cleanup(tmp_path):
    def write(directory):
        writer = OutputWriter(str(directory))
        writer.write_csv("table.csv", ["a", "b"], [[1, 2], [3, 4]])
        writer.write_image("image.pgm", np.arange(12, dtype=np.uint8).reshape(3, 4))
        return writer

    first, second = write(tmp_path / "one"), write(tmp_path / "two")
    assert first.digest() == second.digest()
    with open(tmp_path / "one" / "table.csv", "rb") as f:
        assert f.read() == b"a,b\r\n1,2\r\n3,4\r\n"

    first.remove_all()
    assert not os.path.exists(tmp_path / "one" / "table.csv")
    assert not os.path.exists(tmp_path / "one" / "image.pgm")


@pytest.mark.parametrize("total, bands", [(10, 3), (3, 8), (512, 32), (1, 1)])
def test_split_bands_cover_range(total, bands):
    slices = split_bands(total, bands)
    covered = [i for s in slices for i in range(total)[s]]
    assert covered == list(range(total))
    assert len(slices) <= bands


def test_run_chunks_keeps_order():
    assert run_chunks(abs, [-3, -1, -2], workers=1) == [3, 1, 2]
    assert run_chunks(abs, [-3, -1, -2], workers=2) == [3, 1, 2]


def test_tracker_without_file_keeps_state_in_memory():
    tracker = RunTracker()
    tracker.start_run("r1", "grid")
    tracker.update_progress("r1", "escape grid", 50)
    tracker.complete_step("r1", "escape grid")
    tracker.complete_run("r1")
    run = tracker.runs["r1"]
    assert run["status"] == "completed"
    assert run["current_progress"] == 100
    assert "duration_seconds" in run["steps"]["escape grid"]
