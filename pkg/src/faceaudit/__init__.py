"""faceaudit: batch audits of face-embedding datasets.

Identity-leakage scans, mated/non-mated score distributions, biometric
operating points, duplicate detection, demographic-group accuracy and
benchmark-reliability checks over externally produced embeddings.
"""

__version__ = "0.1.0"
