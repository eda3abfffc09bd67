import json
import logging
import os
import sys
from typing import Any, Dict, Iterable, List, Optional

from dataio.captions import CaptionRecord, read_captions, read_split
from dataio.manifest import FeatureDataset, load_manifest
from tools.config_loader import RunConfig


class BaseTool:
    """One CLI command. ``run`` returns a JSON-serialisable result and writes it to ``output``."""

    def __init__(self, name: str, config: RunConfig):
        self.name = name
        self.config = config
        self.logger = logging.getLogger(self.__class__.__name__)

    def run(self) -> Any:
        raise NotImplementedError("Tool must implement a run method.")

    def load_dataset(self) -> FeatureDataset:
        return load_manifest(self.config.resolve("manifest"))

    def load_captions(self) -> List[CaptionRecord]:
        return read_captions(self.config.resolve("captions"))

    def split_ids(self, split: str, dataset: Optional[FeatureDataset] = None) -> List[str]:
        """Video ids of a split file; every manifest video when the default file is absent."""
        path = self.config.resolve(split)
        if dataset is not None and not getattr(self.config, split) and not os.path.exists(path):
            self.logger.info(f"ℹ️ No {split} file at {path}; using all {len(dataset)} videos")
            return dataset.video_ids
        return read_split(path)

    def _open_output(self):
        path = self.config.output
        if not path:
            return sys.stdout, False
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        return open(path, "w", encoding="utf-8"), True

    def write_json(self, payload: Dict[str, Any]):
        handle, owned = self._open_output()
        try:
            handle.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        finally:
            if owned:
                handle.close()

    def write_json_lines(self, records: Iterable[Dict[str, Any]]):
        handle, owned = self._open_output()
        try:
            for record in records:
                handle.write(json.dumps(record, sort_keys=True) + "\n")
        finally:
            if owned:
                handle.close()
