import logging
import queue
from typing import Any, Callable, List


class TaskQueue:
    """FIFO of video ids processed one after the other, results kept in submission order."""

    def __init__(self):
        self.queue = queue.Queue()
        self.logger = logging.getLogger("TaskQueue")

    def add_task(self, video_id: str):
        if isinstance(video_id, str) and video_id.strip():
            self.queue.put(video_id.strip())
        else:
            self.logger.warning(f"⚠️ Skipping invalid video id: {repr(video_id)}")

    def extend(self, video_ids):
        for video_id in video_ids:
            self.add_task(video_id)

    def get_task(self):
        if not self.queue.empty():
            return self.queue.get()
        return None

    def is_empty(self):
        return self.queue.empty()

    def __len__(self) -> int:
        return self.queue.qsize()

    def execute_all(self, worker_fn: Callable[[str], Any]) -> List[Any]:
        """Runs ``worker_fn`` on every queued video id; the first failure propagates."""
        results = []
        while not self.queue.empty():
            video_id = self.get_task()
            self.logger.debug(f"🚀 Processing {video_id}")
            results.append(worker_fn(video_id))
        return results
