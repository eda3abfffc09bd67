import json
import os

import numpy as np
import pytest

from dataio.batching import collate, video_tensors
from dataio.captions import CaptionRecord, prepare_training_sentences, read_captions, references_by_video
from dataio.manifest import load_manifest, write_manifest
from dataio.synthetic import synthesize_dataset
from dataio.text import detokenize, tokenize
from dataio.vocabulary import RESERVED, Vocabulary, build_vocabulary
from graph.btg import build_bidirectional_trajectories
from tests.conftest import random_video
from utils.errors import DataLoadError, InvalidInputError


class TestTokenize:

    @pytest.mark.parametrize("sentence, expected", [
        ("A man is playing a guitar.", ["a", "man", "is", "playing", "a", "guitar"]),
        ("  Two   DOGS, running!", ["two", "dogs", "running"]),
        ("", []),
        ("...", []),
    ])
    def test_examples(self, sentence, expected):
        assert tokenize(sentence) == expected

    def test_idempotent(self):
        sentence = "The Cat's toy -- is red?"
        once = tokenize(sentence)
        assert tokenize(detokenize(once)) == once


class TestVocabulary:

    def test_reserved_indices(self):
        vocab = Vocabulary(list(RESERVED) + ["x"])
        assert (vocab.pad_index, vocab.bos_index, vocab.eos_index, vocab.unk_index) == (0, 1, 2, 3)
        assert vocab.index("x") == 4
        assert vocab.index("missing") == vocab.unk_index

    def test_frequency_then_lexicographic_order(self):
        vocab = build_vocabulary([CaptionRecord("v", ["b a c", "c b", "c"])])
        assert vocab.tokens[len(RESERVED):] == ["c", "b", "a"]

    def test_min_count(self):
        vocab = build_vocabulary([CaptionRecord("v", ["a b a"])], min_count=2)
        assert len(vocab) == len(RESERVED) + 1
        assert vocab.encode(["a", "b"]) == [4, vocab.unk_index]

    def test_decode_stops_at_eos(self):
        vocab = Vocabulary(list(RESERVED) + ["a", "b"])
        assert vocab.decode([vocab.bos_index, 4, 5, vocab.eos_index, 4]) == ["a", "b"]

    def test_rejects_missing_reserved_prefix(self):
        with pytest.raises(InvalidInputError):
            Vocabulary(["a", "b"])

    def test_rejects_duplicates(self):
        with pytest.raises(InvalidInputError):
            Vocabulary(list(RESERVED) + ["a", "a"])

    def test_empty_corpus(self):
        with pytest.raises(InvalidInputError):
            build_vocabulary([])


class TestTrainingSentences:

    def test_layout(self):
        vocab = Vocabulary(list(RESERVED) + ["a", "b"])
        encoded = prepare_training_sentences([CaptionRecord("v", ["a b"])], vocab, max_len=3)
        np.testing.assert_array_equal(encoded.inputs, [[1, 4, 5, 0]])
        np.testing.assert_array_equal(encoded.targets, [[4, 5, 2, 0]])
        np.testing.assert_array_equal(encoded.mask, [[True, True, True, False]])

    def test_long_sentences_dropped(self):
        vocab = Vocabulary(list(RESERVED) + ["a"])
        encoded = prepare_training_sentences([CaptionRecord("v", ["a a a a", "a"])], vocab, max_len=3)
        assert len(encoded) == 1
        assert encoded.dropped == 1

    def test_full_length_sentence(self):
        vocab = Vocabulary(list(RESERVED) + ["a"])
        encoded = prepare_training_sentences([CaptionRecord("v", ["a a a"])], vocab, max_len=3)
        np.testing.assert_array_equal(encoded.targets, [[4, 4, 4, 2]])
        assert encoded.mask.all()

    def test_unknown_words(self):
        vocab = Vocabulary(list(RESERVED) + ["a"])
        encoded = prepare_training_sentences([CaptionRecord("v", ["a zebra"])], vocab, max_len=2)
        np.testing.assert_array_equal(encoded.inputs, [[1, 4, 3]])

    def test_references_tokenized(self):
        refs = references_by_video([CaptionRecord("v", ["A cat."]), CaptionRecord("v", ["a dog"])])
        assert refs == {"v": [["a", "cat"], ["a", "dog"]]}


def _write(tmp_path, video, N=None):
    path = str(tmp_path / "manifest.json")
    write_manifest(path, [video], (100.0, 80.0))
    if N is not None:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        data["videos"][0]["N"] = N
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f)
    return path


class TestManifest:

    def test_round_trip(self, tmp_path, rng):
        video = random_video(rng, T=3, N=2, D=3, G=4, video_id="clip")
        dataset = load_manifest(_write(tmp_path, video))
        assert dataset.video_ids == ["clip"]
        loaded = dataset.get("clip")
        assert loaded.T == 3 and loaded.N == 2 and loaded.feature_shape == (2, 2, 3)
        for original, restored in zip(video.frames, loaded.frames):
            np.testing.assert_allclose(restored.global_feature_map, original.global_feature_map, rtol=1e-6)
            for a, b in zip(original.regions, restored.regions):
                np.testing.assert_allclose(b.appearance, a.appearance, rtol=1e-6)
                np.testing.assert_allclose(b.box.as_list(), a.box.as_list())
                assert b.confidence == pytest.approx(a.confidence)

    def test_truncated_feature_file(self, tmp_path, rng):
        path = _write(tmp_path, random_video(rng, video_id="clip"))
        frames_file = tmp_path / "features" / "clip.frames.f32"
        data = frames_file.read_bytes()
        frames_file.write_bytes(data[:-4])
        with pytest.raises(DataLoadError) as excinfo:
            load_manifest(path)
        assert "clip.frames.f32" in str(excinfo.value)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(DataLoadError):
            load_manifest(str(tmp_path / "absent.json"))

    def test_unknown_video(self, tmp_path, rng):
        dataset = load_manifest(_write(tmp_path, random_video(rng, video_id="clip")))
        with pytest.raises(DataLoadError):
            dataset.get("other")

    def test_pads_with_most_confident_region(self, tmp_path, rng):
        video = random_video(rng, T=2, N=2, video_id="clip")
        loaded = load_manifest(_write(tmp_path, video, N=3)).get("clip")
        for original, restored in zip(video.frames, loaded.frames):
            assert restored.N == 3
            best = max(original.regions, key=lambda r: r.confidence)
            assert restored.regions[2].confidence == pytest.approx(best.confidence)

    def test_keeps_most_confident_regions(self, tmp_path, rng):
        video = random_video(rng, T=2, N=2, video_id="clip")
        loaded = load_manifest(_write(tmp_path, video, N=1)).get("clip")
        for original, restored in zip(video.frames, loaded.frames):
            best = max(original.regions, key=lambda r: r.confidence)
            assert restored.N == 1
            assert restored.regions[0].confidence == pytest.approx(best.confidence)

    def test_frame_without_detections(self, tmp_path, rng):
        video = random_video(rng, T=2, N=2, H=2, W=2, D=3, G=3, video_id="clip")
        path = _write(tmp_path, video)
        features = tmp_path / "features"
        metadata_file = features / "clip.regions.json"
        metadata = json.loads(metadata_file.read_text(encoding="utf-8"))
        metadata["frames"][0]["regions"] = []
        metadata_file.write_text(json.dumps(metadata), encoding="utf-8")
        for name, row in (("clip.regions.f32", 2 * 2 * 3), ("clip.appearance.f32", 3)):
            values = np.fromfile(features / name, dtype="<f4")
            values[2 * row:].tofile(features / name)

        first = load_manifest(path).get("clip").frame(1)
        assert first.N == 2
        for region in first.regions:
            assert region.box.as_list() == [0.0, 0.0, 100.0, 80.0]
            np.testing.assert_allclose(region.appearance, video.frame(1).global_feature_map.mean(axis=(0, 1)), rtol=1e-5)

    def test_frame_count_mismatch(self, tmp_path, rng):
        path = _write(tmp_path, random_video(rng, T=3, video_id="clip"))
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        data["videos"][0]["T"] = 4
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f)
        with pytest.raises(DataLoadError):
            load_manifest(path)


class TestBatching:

    def test_channels_first_and_trajectory_order(self, rng):
        video = random_video(rng, T=3, N=2, H=2, W=2, D=3)
        trajectories = build_bidirectional_trajectories(video)
        tensors = video_tensors(video, trajectories, ("forward", "backward"))
        objects = tensors.inputs["forward"]["objects"]
        assert tuple(objects.shape) == (2, 3, 3, 2, 2)
        trajectory = trajectories.trajectories("forward")[1]
        frame, region = trajectory.steps[2]
        expected = np.transpose(video.frame(frame).regions[region - 1].feature_map, (2, 0, 1))
        np.testing.assert_allclose(objects[1, 2].numpy(), expected, rtol=1e-6)
        backward_frames = tensors.inputs["backward"]["frames"]
        np.testing.assert_allclose(
            backward_frames[0].numpy(), np.transpose(video.frame(3).global_feature_map, (2, 0, 1)), rtol=1e-6
        )

    def test_collate_empty(self, toy_corpus):
        vocab = build_vocabulary(toy_corpus.records)
        sentences = prepare_training_sentences(toy_corpus.records, vocab)
        with pytest.raises(InvalidInputError):
            collate([], sentences, {})


class TestSynthetic:

    def test_deterministic(self, tmp_path):
        a = synthesize_dataset(str(tmp_path / "a"), seed=3, num_videos=2, T=4, N=2)
        b = synthesize_dataset(str(tmp_path / "b"), seed=3, num_videos=2, T=4, N=2)
        for directory, _, files in os.walk(a.root):
            for name in files:
                relative = os.path.relpath(os.path.join(directory, name), a.root)
                with open(os.path.join(a.root, relative), "rb") as fa, open(os.path.join(b.root, relative), "rb") as fb:
                    assert fa.read() == fb.read(), relative

    def test_outputs(self, toy_corpus):
        dataset = load_manifest(toy_corpus.manifest_path)
        assert len(dataset) == 5
        records = read_captions(toy_corpus.captions_path)
        assert [r.video_id for r in records] == dataset.video_ids
        for video_id, planted in toy_corpus.ground_truth.items():
            assert len(planted["forward"]) == 2
            assert all(len(path) == 6 for path in planted["forward"])

    def test_too_many_objects(self, tmp_path):
        with pytest.raises(InvalidInputError):
            synthesize_dataset(str(tmp_path / "x"), N=7)
