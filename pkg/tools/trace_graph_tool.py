import json
import os

from graph.btg import build_bidirectional_trajectories, score_trajectories
from tasks.task_queue import TaskQueue
from tools.base_tool import BaseTool
from utils.errors import DataLoadError


class TraceGraphTool(BaseTool):
    """Dumps the forward and backward trajectories of the test split.

    When a planted ground-truth file is present every video is scored
    against it and the mean agreement is reported as ``planted_accuracy``.
    """

    def _ground_truth(self):
        path = self.config.resolve("ground_truth")
        if not os.path.exists(path):
            if self.config.ground_truth:
                raise DataLoadError(f"Ground truth file not found: {path}", path=path)
            return None
        with open(path, "r", encoding="utf-8") as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise DataLoadError(f"Malformed ground truth {path}: {e}", path=path) from e

    def run(self):
        dataset = self.load_dataset()
        planted = self._ground_truth()
        tasks = TaskQueue()
        tasks.extend(self.split_ids("test_split", dataset))

        def trace(video_id):
            video = dataset.get(video_id)
            trajectories = build_bidirectional_trajectories(video)
            record = trajectories.to_dict(video_id)
            if planted is not None and video_id in planted:
                record["planted_accuracy"] = score_trajectories(trajectories, planted[video_id])
            return record

        videos = tasks.execute_all(trace)
        result = {"videos": videos}
        scored = [v["planted_accuracy"] for v in videos if "planted_accuracy" in v]
        if scored:
            result["planted_accuracy"] = sum(scored) / len(scored)
            self.logger.info(f"🎯 Planted trajectory agreement {result['planted_accuracy']:.4f} over {len(scored)} videos")
        self.write_json(result)
        return result
