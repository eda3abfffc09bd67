import json
import os

from dataio.captions import references_by_video
from dataio.text import tokenize
from inference.captioning import Captioner
from metrics.bleu import bleu4
from tasks.task_queue import TaskQueue
from tools.base_tool import BaseTool
from training.checkpoint import load_checkpoint
from training.trainer import seed_everything
from utils.errors import DataLoadError


class EvalTool(BaseTool):
    """BLEU@4 of generated captions against the reference captions.

    Candidates come from ``predictions`` (output of the caption command) or,
    when no predictions file is given, from captioning the test split.
    """

    def _read_predictions(self, path):
        if not os.path.exists(path):
            raise DataLoadError(f"Predictions file not found: {path}", path=path)
        candidates = {}
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    candidates[str(record["video_id"])] = tokenize(record["caption"])
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    raise DataLoadError(f"{path}:{line_no}: malformed prediction ({e})", path=path) from e
        return candidates

    def _caption_split(self):
        seed_everything(self.config.seed)
        captioner = Captioner(load_checkpoint(self.config.checkpoint), self.config)
        dataset = self.load_dataset()
        tasks = TaskQueue()
        tasks.extend(self.split_ids("test_split", dataset))
        results = tasks.execute_all(lambda video_id: captioner.caption(dataset.get(video_id)))
        return {r.video_id: tokenize(r.caption) for r in results}

    def run(self):
        if self.config.predictions:
            candidates = self._read_predictions(self.config.predictions)
        else:
            candidates = self._caption_split()
        references = references_by_video(self.load_captions())
        report = bleu4(candidates, references)
        self.write_json(report.to_dict())
        return report
