/**
 * Image loading: PNG (via pngjs) and binary PPM (P6). Pixels come back as
 * RGB floats in [0, 1], row-major height x width x 3.
 */

import { readFileSync } from 'fs'
import { extname } from 'path'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  data: Float32Array // h * w * 3, values in [0, 1]
}

export const SUPPORTED_EXTENSIONS = ['.png', '.ppm']

export function loadImage(path: string): RgbImage {
  const ext = extname(path).toLowerCase()
  if (ext === '.png') return decodePng(readFileSync(path))
  if (ext === '.ppm') return decodePpm(readFileSync(path))
  throw new Error(`unsupported image format: ${path}`)
}

export function decodePng(data: Buffer): RgbImage {
  const png = PNG.sync.read(data)
  const out = new Float32Array(png.width * png.height * 3)
  for (let i = 0; i < png.width * png.height; i++) {
    out[i * 3] = png.data[i * 4] / 255
    out[i * 3 + 1] = png.data[i * 4 + 1] / 255
    out[i * 3 + 2] = png.data[i * 4 + 2] / 255
  }
  return { width: png.width, height: png.height, data: out }
}

/** Binary (P6) PPM with 8-bit samples. */
export function decodePpm(data: Buffer): RgbImage {
  // header: "P6" <width> <height> <maxval> then one whitespace byte
  let offset = 0
  const token = (): string => {
    while (offset < data.length && isSpace(data[offset])) {
      if (data[offset] === 0x23) skipComment()
      else offset++
    }
    const start = offset
    while (offset < data.length && !isSpace(data[offset])) offset++
    return data.toString('ascii', start, offset)
  }
  const skipComment = () => {
    while (offset < data.length && data[offset] !== 0x0a) offset++
  }
  const isSpace = (b: number) => b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d || b === 0x23

  if (token() !== 'P6') throw new Error('not a binary PPM (P6) file')
  const width = parseInt(token(), 10)
  const height = parseInt(token(), 10)
  const maxval = parseInt(token(), 10)
  if (!(width > 0) || !(height > 0)) throw new Error('bad PPM dimensions')
  if (maxval !== 255) throw new Error('only 8-bit PPM supported')
  offset++ // single whitespace after maxval
  const needed = width * height * 3
  if (data.length - offset < needed) throw new Error('truncated PPM pixel data')
  const out = new Float32Array(needed)
  for (let i = 0; i < needed; i++) out[i] = data[offset + i] / 255
  return { width, height, data: out }
}

export function encodePpm(image: RgbImage): Buffer {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, 'ascii')
  const pixels = Buffer.alloc(image.width * image.height * 3)
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = Math.max(0, Math.min(255, Math.round(image.data[i] * 255)))
  }
  return Buffer.concat([header, pixels])
}
