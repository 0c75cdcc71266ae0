"""Python bindings for the cvtslr C++ core."""

from ._core import (
    CvtSlrError,
    beam_decode,
    config_keys,
    config_text,
    contrastive_align_loss,
    ctc_brute_force,
    ctc_gradient,
    ctc_loss,
    edit_alignment,
    evaluate,
    generate_corpus,
    gloss2gloss_ce,
    greedy_decode,
    kl_loss,
    pretrain_vae,
    train_slr,
    wer,
)

__all__ = [
    "CvtSlrError",
    "beam_decode",
    "config_keys",
    "config_text",
    "contrastive_align_loss",
    "ctc_brute_force",
    "ctc_gradient",
    "ctc_loss",
    "edit_alignment",
    "evaluate",
    "generate_corpus",
    "gloss2gloss_ce",
    "greedy_decode",
    "kl_loss",
    "pretrain_vae",
    "train_slr",
    "wer",
]
