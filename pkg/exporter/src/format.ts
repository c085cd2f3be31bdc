/**
 * Binary embedding interchange format (little-endian).
 *
 * Header: magic "IDST", u16 version (= 1), u16 reserved, u32 item count,
 * u32 dim, u32 num_classes. Per item: u32 label followed by dim f32 values.
 * Item id is the 0-based record index.
 */

import { writeFileSync, readFileSync } from 'fs'

export const MAGIC = 'IDST'
export const FORMAT_VERSION = 1
export const HEADER_BYTES = 20

export interface EmbeddingFile {
  dim: number
  numClasses: number
  labels: Uint32Array
  vectors: Float32Array // row-major, count x dim
}

export function encodeEmbeddings(
  labels: ArrayLike<number>,
  vectors: Float32Array,
  dim: number,
  numClasses: number,
): Buffer {
  const count = labels.length
  if (vectors.length !== count * dim) {
    throw new Error(`vector buffer holds ${vectors.length} floats, expected ${count * dim}`)
  }
  if (dim < 1 || numClasses < 1) {
    throw new Error('dim and numClasses must be positive')
  }
  const recordBytes = 4 + 4 * dim
  const buffer = Buffer.alloc(HEADER_BYTES + count * recordBytes)
  buffer.write(MAGIC, 0, 'ascii')
  buffer.writeUInt16LE(FORMAT_VERSION, 4)
  buffer.writeUInt16LE(0, 6)
  buffer.writeUInt32LE(count, 8)
  buffer.writeUInt32LE(dim, 12)
  buffer.writeUInt32LE(numClasses, 16)
  for (let i = 0; i < count; i++) {
    const label = Number(labels[i])
    if (!Number.isInteger(label) || label < 0 || label >= numClasses) {
      throw new Error(`label ${label} out of range at record ${i}`)
    }
    const base = HEADER_BYTES + i * recordBytes
    buffer.writeUInt32LE(label, base)
    for (let k = 0; k < dim; k++) {
      const value = vectors[i * dim + k]
      if (!Number.isFinite(value)) {
        throw new Error(`non-finite value at record ${i}`)
      }
      buffer.writeFloatLE(value, base + 4 + 4 * k)
    }
  }
  return buffer
}

export function writeEmbeddings(
  path: string,
  labels: ArrayLike<number>,
  vectors: Float32Array,
  dim: number,
  numClasses: number,
): void {
  writeFileSync(path, encodeEmbeddings(labels, vectors, dim, numClasses))
}

/** Parse and validate a file; used by tests to check emitted bytes. */
export function readEmbeddings(path: string): EmbeddingFile {
  const data = readFileSync(path)
  if (data.length < HEADER_BYTES) throw new Error('file shorter than header')
  if (data.toString('ascii', 0, 4) !== MAGIC) throw new Error('bad magic')
  if (data.readUInt16LE(4) !== FORMAT_VERSION) throw new Error('unsupported version')
  const count = data.readUInt32LE(8)
  const dim = data.readUInt32LE(12)
  const numClasses = data.readUInt32LE(16)
  const recordBytes = 4 + 4 * dim
  if (data.length !== HEADER_BYTES + count * recordBytes) {
    throw new Error('file size does not match header')
  }
  const labels = new Uint32Array(count)
  const vectors = new Float32Array(count * dim)
  for (let i = 0; i < count; i++) {
    const base = HEADER_BYTES + i * recordBytes
    labels[i] = data.readUInt32LE(base)
    if (labels[i] >= numClasses) throw new Error(`label out of range at record ${i}`)
    for (let k = 0; k < dim; k++) {
      const value = data.readFloatLE(base + 4 + 4 * k)
      if (!Number.isFinite(value)) throw new Error(`non-finite value at record ${i}`)
      vectors[i * dim + k] = value
    }
  }
  return { dim, numClasses, labels, vectors }
}
