"""HTTP service exposing the mock QPU and QRMI."""
