import json
import os
from datetime import datetime
from typing import Any, Dict, Optional

from app.core.logging import logger


class RunTracker:
    """Step timing and progress for CLI runs, optionally persisted as JSON."""

    def __init__(self, data_file: Optional[str] = None):
        self.data_file = data_file
        self.runs: Dict[str, Dict[str, Any]] = {}
        self.load_data()

    def load_data(self):
        """Load existing records from the JSON file."""
        if not self.data_file:
            return
        try:
            if os.path.exists(self.data_file):
                with open(self.data_file, 'r') as f:
                    self.runs = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Could not load run record {self.data_file}: {e}")
            self.runs = {}

    def save_data(self):
        """Write current records to the JSON file, if one was configured."""
        if not self.data_file:
            return
        directory = os.path.dirname(self.data_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        try:
            with open(self.data_file, 'w') as f:
                json.dump(self.runs, f, indent=2)
        except OSError as e:
            logger.error(f"Error saving run record: {e}")

    def _calculate_duration(self, start_time: str, end_time: Optional[str] = None) -> float:
        start = datetime.fromisoformat(start_time)
        end = datetime.fromisoformat(end_time) if end_time else datetime.now()
        return (end - start).total_seconds()

    def start_run(self, run_id: str, command: str):
        start_time = datetime.now().isoformat()
        self.runs[run_id] = {
            "command": command,
            "start_time": start_time,
            "steps": {},
            "current_progress": 0,
            "status": "in_progress",
        }
        logger.info(f"Starting run {run_id} ({command})")
        self.save_data()

    def update_progress(self, run_id: str, step_name: str, progress: float):
        if run_id not in self.runs:
            self.start_run(run_id, "unknown")

        steps = self.runs[run_id]["steps"]
        if step_name not in steps:
            steps[step_name] = {"start_time": datetime.now().isoformat()}
        steps[step_name]["progress"] = progress
        self.runs[run_id]["current_progress"] = progress
        logger.info(f"[{run_id}] {step_name} ({progress:.0f}%)")
        self.save_data()

    def complete_step(self, run_id: str, step_name: str):
        step = self.runs.get(run_id, {}).get("steps", {}).get(step_name)
        if step is None:
            return
        end_time = datetime.now().isoformat()
        step["end_time"] = end_time
        step["duration_seconds"] = self._calculate_duration(step["start_time"], end_time)
        logger.info(f"[{run_id}] completed {step_name} in {step['duration_seconds']:.2f} s")
        self.save_data()

    def complete_run(self, run_id: str, status: str = "completed"):
        run = self.runs.get(run_id)
        if run is None:
            return
        end_time = datetime.now().isoformat()
        run["end_time"] = end_time
        run["status"] = status
        run["total_duration_seconds"] = self._calculate_duration(run["start_time"], end_time)
        if status == "completed":
            run["current_progress"] = 100
        logger.info(self._format_run_summary(run_id))
        self.save_data()

    def _format_run_summary(self, run_id: str) -> str:
        run = self.runs[run_id]
        summary = [
            f"Run {run_id} {run['status']}",
            f"Total Duration: {run['total_duration_seconds']:.2f} seconds",
            f"Steps Completed: {sum(1 for s in run['steps'].values() if 'end_time' in s)}",
        ]
        for step, info in run["steps"].items():
            if "duration_seconds" in info:
                summary.append(f"- {step}: {info['duration_seconds']:.2f} seconds")
        return "\n".join(summary)
