"""Python bindings for the correlation-aware decoupled KL distillation core."""

try:
    from cakd._cakd import (
        BinaryProb,
        DecoupledKL,
        DegeneratePartitionError,
        LossConfig,
        Partition,
        binary_probs,
        confidence_ratio,
        decouple,
        decouple_single_label,
        generate_blobs,
        grad_student,
        kl_divergence,
        log_softmax,
        partition_single_label,
        partition_topk,
        softmax,
    )
except ImportError:  # build-tree layout: extension module sits on PYTHONPATH
    from _cakd import (
        BinaryProb,
        DecoupledKL,
        DegeneratePartitionError,
        LossConfig,
        Partition,
        binary_probs,
        confidence_ratio,
        decouple,
        decouple_single_label,
        generate_blobs,
        grad_student,
        kl_divergence,
        log_softmax,
        partition_single_label,
        partition_topk,
        softmax,
    )

__all__ = [
    "BinaryProb",
    "DecoupledKL",
    "DegeneratePartitionError",
    "LossConfig",
    "Partition",
    "binary_probs",
    "confidence_ratio",
    "decouple",
    "decouple_single_label",
    "generate_blobs",
    "grad_student",
    "kl_divergence",
    "log_softmax",
    "partition_single_label",
    "partition_topk",
    "softmax",
]
