from inference.captioning import Captioner
from tasks.task_queue import TaskQueue
from tools.base_tool import BaseTool
from training.checkpoint import load_checkpoint
from training.trainer import seed_everything


class CaptionTool(BaseTool):
    """Beam-search captions for the test split, one JSON line per video."""

    def run(self):
        seed_everything(self.config.seed)
        checkpoint = load_checkpoint(self.config.checkpoint)
        captioner = Captioner(checkpoint, self.config)
        dataset = self.load_dataset()
        tasks = TaskQueue()
        tasks.extend(self.split_ids("test_split", dataset))
        results = tasks.execute_all(lambda video_id: captioner.caption(dataset.get(video_id)))
        self.write_json_lines(r.to_dict() for r in results)
        self.logger.info(f"📝 Captioned {len(results)} videos (beam {captioner.config.beam}, fusion {captioner.config.fusion})")
        return results
