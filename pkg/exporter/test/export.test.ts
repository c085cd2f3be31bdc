import { mkdirSync, readFileSync, rmSync, writeFileSync } from 'fs'
import { join } from 'path'
import { beforeAll, describe, expect, it } from 'vitest'

import { indexDataset } from '../src/dataset'
import { HEADER_BYTES, readEmbeddings } from '../src/format'
import { decodePpm, encodePpm, RgbImage } from '../src/images'
import { mulberry32, SEEDED_CONV, SEEDED_CONV_DIM } from '../src/model'
import { runExport } from '../src/export'

const OUT_DIR = join(__dirname, '..', 'out')
const DATA_DIR = join(OUT_DIR, 'toy-dataset')
const ARTIFACT = join(OUT_DIR, 'toy.idst')
const ARTIFACT_AGAIN = join(OUT_DIR, 'toy_again.idst')

/** 9 classes x 10 deterministic 16x16 PPM images. */
function makeToyDataset(root: string): void {
  rmSync(root, { recursive: true, force: true })
  mkdirSync(root, { recursive: true })
  const rand = mulberry32(1234)
  for (let c = 0; c < 9; c++) {
    const dir = join(root, `class${c}`)
    mkdirSync(dir)
    for (let i = 0; i < 10; i++) {
      const image: RgbImage = { width: 16, height: 16, data: new Float32Array(16 * 16 * 3) }
      for (let p = 0; p < image.data.length; p++) {
        // class-dependent hue plus deterministic noise
        const channel = p % 3
        image.data[p] = Math.min(1, (channel === c % 3 ? 0.6 : 0.2) + rand() * 0.3)
      }
      writeFileSync(join(dir, `img_${String(i).padStart(2, '0')}.ppm`), encodePpm(image))
    }
  }
}

beforeAll(() => {
  mkdirSync(OUT_DIR, { recursive: true })
  makeToyDataset(DATA_DIR)
})

describe('ppm codec', () => {
  it('round-trips pixel data', () => {
    const image: RgbImage = { width: 3, height: 2, data: new Float32Array(18) }
    for (let i = 0; i < 18; i++) image.data[i] = (i * 13 % 256) / 255
    const back = decodePpm(encodePpm(image))
    expect(back.width).toBe(3)
    expect(back.height).toBe(2)
    for (let i = 0; i < 18; i++) expect(back.data[i]).toBeCloseTo(image.data[i], 6)
  })
})

describe('dataset indexing', () => {
  it('maps labels from sorted class names and orders files', () => {
    const index = indexDataset(DATA_DIR)
    expect(index.classNames).toEqual(
      Array.from({ length: 9 }, (_, c) => `class${c}`).sort(),
    )
    expect(index.entries.length).toBe(90)
    expect(index.entries[0].label).toBe(0)
    expect(index.entries[89].label).toBe(8)
    // class-major, file-name order
    const labels = index.entries.map((e) => e.label)
    expect([...labels].sort((a, b) => a - b)).toEqual(labels)
  })

  it('errors on an empty class directory', () => {
    const root = join(OUT_DIR, 'empty-class')
    rmSync(root, { recursive: true, force: true })
    mkdirSync(join(root, 'classA'), { recursive: true })
    mkdirSync(join(root, 'classB'), { recursive: true })
    writeFileSync(join(root, 'classA', 'x.ppm'),
      encodePpm({ width: 2, height: 2, data: new Float32Array(12) }))
    expect(() => indexDataset(root)).toThrow(/classB has no images/)
  })
})

describe('export', () => {
  it('writes 90 records with the backbone width and sorted label mapping', async () => {
    const result = await runExport({
      dataDir: DATA_DIR,
      model: SEEDED_CONV,
      outPath: ARTIFACT,
      resolution: 64,
      batchSize: 32,
    })
    expect(result.count).toBe(90)
    expect(result.numClasses).toBe(9)
    expect(result.dim).toBe(SEEDED_CONV_DIM)
    expect(result.skipped).toEqual([])

    const parsed = readEmbeddings(ARTIFACT)
    expect(parsed.numClasses).toBe(9)
    expect(parsed.labels.length).toBe(90)
    expect(parsed.dim).toBe(SEEDED_CONV_DIM)
    // 10 items per class, class-major order
    for (let c = 0; c < 9; c++) {
      for (let i = 0; i < 10; i++) expect(parsed.labels[c * 10 + i]).toBe(c)
    }
    // header layout is bit-exact
    const raw = readFileSync(ARTIFACT)
    expect(raw.toString('ascii', 0, 4)).toBe('IDST')
    expect(raw.readUInt16LE(4)).toBe(1)
    expect(raw.readUInt32LE(8)).toBe(90)
    expect(raw.length).toBe(HEADER_BYTES + 90 * (4 + 4 * SEEDED_CONV_DIM))
    // metadata sidecar records preprocessing
    const meta = JSON.parse(readFileSync(ARTIFACT + '.meta.json', 'utf-8'))
    expect(meta.resolution).toBe(64)
    expect(meta.class_names.length).toBe(9)
  }, 120_000)

  it('re-export is byte-identical', async () => {
    await runExport({
      dataDir: DATA_DIR,
      model: SEEDED_CONV,
      outPath: ARTIFACT_AGAIN,
      resolution: 64,
      batchSize: 16, // different batching must not change records
    })
    expect(readFileSync(ARTIFACT_AGAIN).equals(readFileSync(ARTIFACT))).toBe(true)
  }, 120_000)

  it('skips unreadable images with a warning but keeps the rest', async () => {
    const root = join(OUT_DIR, 'broken-dataset')
    rmSync(root, { recursive: true, force: true })
    for (const c of ['a', 'b']) {
      mkdirSync(join(root, c), { recursive: true })
      for (let i = 0; i < 3; i++) {
        writeFileSync(join(root, c, `ok${i}.ppm`),
          encodePpm({ width: 4, height: 4, data: new Float32Array(48).fill(0.5) }))
      }
    }
    writeFileSync(join(root, 'a', 'corrupt.ppm'), Buffer.from('P6\n4 4\n255\nxx'))
    const out = join(OUT_DIR, 'broken.idst')
    const result = await runExport({
      dataDir: root, model: SEEDED_CONV, outPath: out, resolution: 64, batchSize: 8,
    })
    expect(result.count).toBe(6)
    expect(result.skipped.length).toBe(1)
    expect(result.skipped[0].path).toContain('corrupt.ppm')
    const parsed = readEmbeddings(out)
    expect(parsed.labels.length).toBe(6)
  }, 120_000)

  it('rejects unknown model identifiers', async () => {
    await expect(runExport({
      dataDir: DATA_DIR, model: 'no-such-model', outPath: join(OUT_DIR, 'x.idst'),
      resolution: 64, batchSize: 8,
    })).rejects.toThrow(/unknown model identifier/)
  })
})
