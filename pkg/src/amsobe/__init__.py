"""Gait-based biometric template protection and message encryption.

Submodules:

* :mod:`amsobe.signal` - IMU signal denoising, cycle detection, segmentation
* :mod:`amsobe.ablstm` - attention-BLSTM feature extractor (NumPy, manual backprop)
* :mod:`amsobe.template` - feature templates, extended vectors, quantization
* :mod:`amsobe.sot` - SOT template encryption and encrypted-domain matching
* :mod:`amsobe.pairing` - bilinear group abstraction and a transparent test group
* :mod:`amsobe.bbe` - biometric-based encryption and byte-payload sealing
* :mod:`amsobe.vault` - cloud-side storage of ciphertexts
* :mod:`amsobe.protocol` - simulated device/cloud/peer flows
* :mod:`amsobe.bench` - timing and synthetic matching experiments
"""

__version__ = "0.1.0"
