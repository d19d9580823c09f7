"""Blur-robust optical flow with a deblurring-in-the-loop variational solver.

The heavy lifting lives in the `_lmof` extension module; this package
re-exports its public surface. The extension sits inside the package when
installed, or on sys.path as a top-level module in development builds.
"""

try:
    from . import _lmof as _ext
except ImportError:
    import _lmof as _ext

FormatError = _ext.FormatError
NumericalError = _ext.NumericalError
aae = _ext.aae
aee = _ext.aee
blur_match = _ext.blur_match
deblur = _ext.deblur
estimate_flow = _ext.estimate_flow
estimate_kernel = _ext.estimate_kernel
flow_to_color = _ext.flow_to_color
make_case = _ext.make_case
nonblind_deconv = _ext.nonblind_deconv
psnr = _ext.psnr
read_flo = _ext.read_flo
write_flo = _ext.write_flo

__all__ = [
    "FormatError",
    "NumericalError",
    "aae",
    "aee",
    "blur_match",
    "deblur",
    "estimate_flow",
    "estimate_kernel",
    "flow_to_color",
    "make_case",
    "nonblind_deconv",
    "psnr",
    "read_flo",
    "write_flo",
]
