from dataio.synthetic import synthesize_dataset
from tools.base_tool import BaseTool


class SynthTool(BaseTool):
    """Writes a synthetic corpus with planted trajectories to ``data_root``."""

    def run(self):
        config = self.config
        corpus = synthesize_dataset(
            config.data_root,
            seed=config.seed,
            num_videos=config.synth_videos,
            T=config.T,
            N=config.N,
            H=config.synth_height,
            W=config.synth_width,
            D=config.synth_channels,
            G=config.synth_appearance_dim,
        )
        summary = {
            "root": corpus.root,
            "manifest": corpus.manifest_path,
            "captions": corpus.captions_path,
            "ground_truth": corpus.ground_truth_path,
            "videos": len(corpus.videos),
        }
        self.write_json(summary)
        return summary
