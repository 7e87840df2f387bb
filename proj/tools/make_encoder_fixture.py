"""Regenerates tests/fixtures/tiny_distilbert: a randomly initialised two-layer
DistilBERT, its vocabulary, and reference tokenizations and hidden states
computed with HF transformers in float64."""

import json
import pathlib
import sys

import torch
from transformers import DistilBertConfig, DistilBertModel, DistilBertTokenizer

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures/tiny_distilbert")
MAX_TOKENS = 16

WORDS = ["the", "a", "i", "love", "hate", "this", "that", "movie", "music", "people", "think",
         "feel", "play", "run", "un", "##believ", "##able", "##s", "##ing", "##ed", "caf", "##e",
         "don", "'", "t", "!", "?", ",", ".", "introvert", "extro", "##vert"]
TEXTS = [
    "I love this movie!",
    "Unbelievable people think, feel and play.",
    "Don't hate the music...",
    "Café extrovert introverts running",
    "",
    "the the the the the the the the the the the the the the the the the the the the",
    "zzz qqq ¿?",
]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + WORDS
    vocab += [c for c in "abcdefghijklmnopqrstuvwxyz" if c not in vocab]
    vocab += ["##" + c for c in "abcdefghijklmnopqrstuvwxyz" if "##" + c not in vocab]
    (OUT / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")

    torch.manual_seed(1234)
    config = DistilBertConfig(vocab_size=len(vocab), dim=32, n_layers=2, n_heads=4, hidden_dim=64,
                              max_position_embeddings=64, dropout=0.0, attention_dropout=0.0)
    model = DistilBertModel(config).eval()
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name.endswith("weight") and "LayerNorm" not in name and "layer_norm" not in name:
                p.normal_(0.0, 0.2)
            else:
                p.normal_(0.0 if name.endswith("bias") else 1.0, 0.1)
    model.save_pretrained(OUT, safe_serialization=True)
    for extra in ("generation_config.json",):
        (OUT / extra).unlink(missing_ok=True)

    tok = DistilBertTokenizer(str(OUT / "vocab.txt"), do_lower_case=True)
    model64 = model.double()
    cases = []
    for text in TEXTS:
        enc = tok(text, max_length=MAX_TOKENS, truncation=True, padding="max_length", return_tensors="pt")
        with torch.no_grad():
            hidden = model64(input_ids=enc["input_ids"], attention_mask=enc["attention_mask"]).last_hidden_state[0]
        cases.append({
            "text": text,
            "ids": enc["input_ids"][0].tolist(),
            "mask": enc["attention_mask"][0].tolist(),
            "hidden": hidden.tolist(),
        })
    golden = {"max_tokens": MAX_TOKENS, "transformers": __import__("transformers").__version__, "cases": cases}
    (OUT / "golden.json").write_text(json.dumps(golden, indent=1) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
