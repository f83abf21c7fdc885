from .autograd import (
    ShapeError,
    Tape,
    Tensor,
    add,
    concat_cols,
    diff_norm,
    gather_rows,
    interval_sq,
    l2_norm_rows,
    matmul,
    mean,
    relu,
    relu_diff_norm,
    scale,
    segment_sum,
    sub,
    total,
)
from .gradcheck import GradCheckReport, grad_check
