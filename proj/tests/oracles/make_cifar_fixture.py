"""Writes the hand-authored CIFAR binary fixtures.

cifar10_fixture.bin (2 records, 3073 bytes each):
  record 0: label 3; R plane all 0, G plane byte i = i % 256, B plane all 255
  record 1: label 7; all 0 except R[0] = 255 and G[1023] = 128
cifar100_fixture.bin (1 record, 3074 bytes):
  coarse 11, fine 42; pixel byte i = (7 * i) % 256 over all 3072 bytes
"""
import pathlib
import sys

out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else ".")

r0 = bytes([3]) + bytes(1024) + bytes(i % 256 for i in range(1024)) + bytes([255] * 1024)
px = bytearray(3072)
px[0] = 255
px[1024 + 1023] = 128
r1 = bytes([7]) + bytes(px)
(out / "cifar10_fixture.bin").write_bytes(r0 + r1)

r = bytes([11, 42]) + bytes((7 * i) % 256 for i in range(3072))
(out / "cifar100_fixture.bin").write_bytes(r)
