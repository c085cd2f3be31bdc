/**
 * Convolutional backbones producing penultimate-layer features.
 *
 * Two kinds of model identifier:
 *   - "seeded-conv": a small built-in backbone whose weights come from a
 *     fixed PRNG, so exports are deterministic and need no downloads.
 *     Penultimate width: 64.
 *   - "url:<graph-model-url>": any tfjs GraphModel whose output is a
 *     per-image feature vector (e.g. an image feature-vector model from a
 *     public zoo). Requires network access to the given URL.
 *
 * Inference only; weights are never updated here.
 */

import * as tf from '@tensorflow/tfjs'

export interface Backbone {
  name: string
  featureDim: number
  /** batch of rank-4 [n, h, w, 3] inputs in [0,1] -> [n, featureDim] */
  embed(batch: tf.Tensor4D): tf.Tensor2D
  dispose(): void
}

export const SEEDED_CONV = 'seeded-conv'
export const SEEDED_CONV_DIM = 64
const SEEDED_CONV_SEED = 0x5eed

/** Deterministic PRNG (mulberry32) for reproducible built-in weights. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x6d2b79f5) >>> 0
    let t = state
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function seededTensor(rand: () => number, shape: number[], scale: number): tf.Tensor {
  const size = shape.reduce((a, b) => a * b, 1)
  const values = new Float32Array(size)
  for (let i = 0; i < size; i++) values[i] = (rand() * 2 - 1) * scale
  return tf.tensor(values, shape)
}

function buildSeededConv(): Backbone {
  const model = tf.sequential()
  model.add(tf.layers.conv2d({
    inputShape: [null as unknown as number, null as unknown as number, 3],
    filters: 16, kernelSize: 3, strides: 2, padding: 'same', activation: 'relu',
  }))
  model.add(tf.layers.conv2d({
    filters: 32, kernelSize: 3, strides: 2, padding: 'same', activation: 'relu',
  }))
  model.add(tf.layers.conv2d({
    filters: SEEDED_CONV_DIM, kernelSize: 3, strides: 2, padding: 'same', activation: 'relu',
  }))
  model.add(tf.layers.globalAveragePooling2d({ dataFormat: 'channelsLast' }))

  const rand = mulberry32(SEEDED_CONV_SEED)
  const weights: tf.Tensor[] = []
  for (const current of model.getWeights()) {
    const fanIn = current.shape.slice(0, -1).reduce((a, b) => a * (b ?? 1), 1)
    const scale = current.shape.length > 1 ? Math.sqrt(3 / fanIn) : 0.05
    weights.push(seededTensor(rand, current.shape as number[], scale))
  }
  model.setWeights(weights)
  weights.forEach((w) => w.dispose())

  return {
    name: SEEDED_CONV,
    featureDim: SEEDED_CONV_DIM,
    embed: (batch) => tf.tidy(() => model.predict(batch) as tf.Tensor2D),
    dispose: () => model.dispose(),
  }
}

async function loadGraphBackbone(url: string): Promise<Backbone> {
  const model = await tf.loadGraphModel(url)
  let featureDim = -1
  return {
    name: `url:${url}`,
    get featureDim() {
      if (featureDim < 0) throw new Error('feature dim known after first batch')
      return featureDim
    },
    embed: (batch) => tf.tidy(() => {
      const raw = model.predict(batch) as tf.Tensor
      const flat = raw.reshape([batch.shape[0], -1]) as tf.Tensor2D
      featureDim = flat.shape[1]
      return flat
    }),
    dispose: () => model.dispose(),
  }
}

export async function loadBackbone(identifier: string): Promise<Backbone> {
  await tf.setBackend('cpu')
  await tf.ready()
  if (identifier === SEEDED_CONV) return buildSeededConv()
  if (identifier.startsWith('url:')) return loadGraphBackbone(identifier.slice(4))
  throw new Error(`unknown model identifier: ${identifier} (use "${SEEDED_CONV}" or "url:<graph-model-url>")`)
}
