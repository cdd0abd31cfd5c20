"""Key-aggregate encryption for FPGA bitstream distribution.

One content provider encrypts a payload once for a cluster of boards; each
board in the cluster decrypts with its own private key.  The package bundles
the pairing-based key-aggregate cryptosystem, hybrid payload sealing, a
per-board baseline scheme for comparison, a cloud-style workflow with a
persistent registry (library, HTTP service, and CLI), and a benchmark
harness.
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
