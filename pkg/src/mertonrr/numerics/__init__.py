from .normal import (DomainError, norm_cdf_array, norm_pdf_array, norm_ppf_array,
                     std_normal_cdf, std_normal_pdf, std_normal_quantile)
from .quadrature import QuadratureError, QuadratureSpec, integrate
from .rng import RngStream, draw_poisson, draw_standard_normal, draw_uniform

__all__ = [
    "DomainError", "QuadratureError", "QuadratureSpec", "RngStream",
    "draw_poisson", "draw_standard_normal", "draw_uniform", "integrate",
    "norm_cdf_array", "norm_pdf_array", "norm_ppf_array",
    "std_normal_cdf", "std_normal_pdf", "std_normal_quantile",
]
