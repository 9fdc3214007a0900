"""Encoder backends.

``HashedBackend`` is fully offline and deterministic: token embeddings
are hash-seeded Gaussian vectors, patch features are pixel statistics
under a fixed random projection, and captions fall back to the record's
precomputed caption or a pixel-statistics template. It exists so the
export pipeline and its file contract can run and be tested without
pretrained weights.

``PretrainedBackend`` uses a BERT-style text encoder and a ViT or ResNet
image backbone (features before the classification layer: the 7x7 grid of
the last stage), plus a vision-encoder/text-decoder captioner. It imports
torch/transformers lazily and raises ``AssetsUnavailable`` when weights
cannot be loaded, so offline environments fall back cleanly.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np
from PIL import Image

IMAGE_SIZE = 224
PATCH_SIZE = 32
GRID_SIDE = IMAGE_SIZE // PATCH_SIZE          # 7
PATCH_COUNT = GRID_SIDE * GRID_SIDE           # 49

_WORD_RE = re.compile(r"[A-Za-z0-9']+")


class AssetsUnavailable(RuntimeError):
    """Pretrained weights are not present in this environment."""


def tokenize(text: str, max_len: int) -> list[str]:
    return _WORD_RE.findall(text.lower())[:max_len]


def _hash_stream(name: str) -> np.random.Generator:
    digest = hashlib.blake2b(name.encode(), digest_size=8).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


def load_patches(image_path, grid_side: int = GRID_SIDE) -> np.ndarray:
    """Resize to 224x224 and cut into row-major 32x32 RGB patches."""
    with Image.open(image_path) as img:
        rgb = img.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE))
    pixels = np.asarray(rgb, dtype=np.float64) / 255.0
    size = IMAGE_SIZE // grid_side
    patches = []
    for row in range(grid_side):
        for col in range(grid_side):
            patches.append(pixels[row * size:(row + 1) * size,
                                  col * size:(col + 1) * size])
    return np.stack(patches)  # (49, 32, 32, 3)


class HashedBackend:
    """Deterministic offline encoder."""

    name = "hashed"

    def __init__(self, d_text: int = 32, d_img: int = 32):
        self.d_text = d_text
        self.d_img = d_img
        # fixed projection from the 12 per-patch pixel statistics
        self._proj = _hash_stream("hashed-backend/patch-projection").normal(
            0.0, 1.0, size=(12, d_img))

    def encode_tokens(self, tokens: list[str]) -> np.ndarray:
        rows = [_hash_stream(f"hashed-backend/token/{tok}").normal(0.0, 1.0, self.d_text)
                for tok in tokens]
        return np.stack(rows)

    def encode_image(self, image_path) -> np.ndarray:
        patches = load_patches(image_path)
        stats = np.concatenate([
            patches.mean(axis=(1, 2)),                # (49, 3)
            patches.std(axis=(1, 2)),                 # (49, 3)
            patches.max(axis=(1, 2)),                 # (49, 3)
            patches.min(axis=(1, 2)),                 # (49, 3)
        ], axis=1)                                    # (49, 12)
        return stats @ self._proj

    def caption_image(self, image_path) -> str:
        """Pixel-statistics template caption (used only when the record
        carries no precomputed caption)."""
        patches = load_patches(image_path)
        mean_rgb = patches.mean(axis=(0, 1, 2))
        names = ("red", "green", "blue")
        dominant = names[int(np.argmax(mean_rgb))]
        brightness = "bright" if mean_rgb.mean() > 0.5 else "dark"
        return f"a {brightness} image with mostly {dominant} tones"


class PretrainedBackend:
    """BERT text encoder + ViT/ResNet patch features + captioner."""

    name = "pretrained"

    def __init__(self, image_encoder: str = "vit",
                 text_model: str = "bert-base-uncased",
                 vit_model: str = "google/vit-base-patch32-224-in21k",
                 caption_model: str = "nlpconnect/vit-gpt2-image-captioning"):
        try:
            import torch  # noqa: F401
            import transformers  # noqa: F401
        except ImportError as exc:
            raise AssetsUnavailable(f"torch/transformers not importable: {exc}") from exc
        self.image_encoder = image_encoder
        self.text_model_name = text_model
        self.vit_model_name = vit_model
        self.caption_model_name = caption_model
        self._text = None
        self._image = None
        self._captioner = None

    @property
    def d_text(self) -> int:
        return self._load_text()[1].config.hidden_size

    def _load_text(self):
        if self._text is None:
            from transformers import AutoModel, AutoTokenizer
            try:
                tokenizer = AutoTokenizer.from_pretrained(self.text_model_name)
                model = AutoModel.from_pretrained(self.text_model_name)
            except Exception as exc:
                raise AssetsUnavailable(f"text encoder unavailable: {exc}") from exc
            model.eval()
            self._text = (tokenizer, model)
        return self._text

    def encode_tokens(self, tokens: list[str]) -> np.ndarray:
        """Embed pre-tokenized words; each word is represented by its first
        subword's last hidden state, so word-level dependency edges stay
        aligned with the emitted rows."""
        import torch
        tokenizer, model = self._load_text()
        encoded = tokenizer(tokens, is_split_into_words=True, return_tensors="pt",
                            truncation=True)
        with torch.no_grad():
            hidden = model(**encoded).last_hidden_state[0]
        word_ids = encoded.word_ids(0)
        first_subword = {}
        for position, word_id in enumerate(word_ids):
            if word_id is not None and word_id not in first_subword:
                first_subword[word_id] = position
        rows = [hidden[first_subword[w]].numpy() for w in range(len(tokens))
                if w in first_subword]
        return np.asarray(rows, dtype=np.float64)

    def encode_image(self, image_path) -> np.ndarray:
        """Features before the classification layer: ViT patch tokens or
        the ResNet last-stage 7x7 feature grid, flattened row-major."""
        import torch
        if self._image is None:
            try:
                if self.image_encoder == "vit":
                    from transformers import AutoImageProcessor, ViTModel
                    processor = AutoImageProcessor.from_pretrained(self.vit_model_name)
                    model = ViTModel.from_pretrained(self.vit_model_name)
                else:
                    import torchvision
                    model = torchvision.models.resnet50(
                        weights=torchvision.models.ResNet50_Weights.IMAGENET1K_V2)
                    processor = torchvision.models.ResNet50_Weights.IMAGENET1K_V2.transforms()
            except Exception as exc:
                raise AssetsUnavailable(f"image encoder unavailable: {exc}") from exc
            model.eval()
            self._image = (processor, model)
        processor, model = self._image
        with Image.open(image_path) as img:
            rgb = img.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE))
        with torch.no_grad():
            if self.image_encoder == "vit":
                inputs = processor(images=rgb, return_tensors="pt")
                hidden = model(**inputs).last_hidden_state[0]
                return hidden[1:1 + PATCH_COUNT].numpy().astype(np.float64)
            batch = processor(rgb).unsqueeze(0)
            stem = torch.nn.Sequential(*list(model.children())[:-2])
            fmap = stem(batch)[0]  # (2048, 7, 7)
            return fmap.reshape(fmap.shape[0], -1).T.numpy().astype(np.float64)

    def caption_image(self, image_path) -> str:
        import torch
        if self._captioner is None:
            try:
                from transformers import (AutoImageProcessor, AutoTokenizer,
                                          VisionEncoderDecoderModel)
                model = VisionEncoderDecoderModel.from_pretrained(self.caption_model_name)
                processor = AutoImageProcessor.from_pretrained(self.caption_model_name)
                tokenizer = AutoTokenizer.from_pretrained(self.caption_model_name)
            except Exception as exc:
                raise AssetsUnavailable(f"captioner unavailable: {exc}") from exc
            model.eval()
            self._captioner = (processor, tokenizer, model)
        processor, tokenizer, model = self._captioner
        with Image.open(image_path) as img:
            rgb = img.convert("RGB")
        inputs = processor(images=rgb, return_tensors="pt")
        with torch.no_grad():
            ids = model.generate(inputs.pixel_values, max_length=24, num_beams=3)
        return tokenizer.decode(ids[0], skip_special_tokens=True).strip()


def make_backend(name: str, **kwargs):
    """Backend factory: 'hashed', 'pretrained', or 'auto' (pretrained when
    its assets load, hashed otherwise)."""
    if name == "hashed":
        return HashedBackend()
    if name == "pretrained":
        return PretrainedBackend(**kwargs)
    if name == "auto":
        try:
            backend = PretrainedBackend(**kwargs)
            backend._load_text()  # force asset resolution
            return backend
        except AssetsUnavailable:
            return HashedBackend()
    raise ValueError(f"unknown backend {name!r}")
