/**
 * Export job: walk a class-labeled image directory, embed every image with
 * the chosen backbone's penultimate features, and write the binary
 * interchange format plus a sidecar metadata file recording preprocessing.
 *
 * Unreadable images are skipped with a warning (index logged); an empty
 * class is an error. Record order is class name, then file name, so
 * re-exports are order-identical.
 */

import { writeFileSync } from 'fs'
import * as tf from '@tensorflow/tfjs'

import { indexDataset } from './dataset'
import { writeEmbeddings } from './format'
import { loadImage, RgbImage } from './images'
import { loadBackbone } from './model'

export interface ExportJob {
  dataDir: string
  model: string
  outPath: string
  resolution: number
  batchSize: number
}

export interface ExportResult {
  count: number
  dim: number
  numClasses: number
  classNames: string[]
  skipped: { index: number; path: string; reason: string }[]
}

function toTensor(images: RgbImage[], resolution: number): tf.Tensor4D {
  return tf.tidy(() => {
    const resized = images.map((image) => {
      const pixels = tf.tensor3d(image.data, [image.height, image.width, 3])
      return tf.image.resizeBilinear(pixels, [resolution, resolution])
    })
    return tf.stack(resized) as tf.Tensor4D
  })
}

export async function runExport(job: ExportJob): Promise<ExportResult> {
  if (job.resolution < 8) throw new Error('resolution too small')
  if (job.batchSize < 1) throw new Error('batch size must be positive')

  const dataset = indexDataset(job.dataDir)
  const backbone = await loadBackbone(job.model)
  const skipped: ExportResult['skipped'] = []

  const labels: number[] = []
  const features: Float32Array[] = []
  let pendingImages: RgbImage[] = []
  let pendingLabels: number[] = []

  const flush = () => {
    if (pendingImages.length === 0) return
    const batch = toTensor(pendingImages, job.resolution)
    const output = backbone.embed(batch)
    const values = output.dataSync() as Float32Array
    const dim = output.shape[1]
    for (let i = 0; i < pendingLabels.length; i++) {
      labels.push(pendingLabels[i])
      features.push(values.slice(i * dim, (i + 1) * dim))
    }
    batch.dispose()
    output.dispose()
    pendingImages = []
    pendingLabels = []
  }

  dataset.entries.forEach((entry, index) => {
    let image: RgbImage
    try {
      image = loadImage(entry.path)
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err)
      console.warn(`skipping unreadable image #${index} (${entry.path}): ${reason}`)
      skipped.push({ index, path: entry.path, reason })
      return
    }
    pendingImages.push(image)
    pendingLabels.push(entry.label)
    if (pendingImages.length >= job.batchSize) flush()
  })
  flush()

  if (labels.length === 0) throw new Error('no readable images found')
  const dim = features[0].length
  const flat = new Float32Array(labels.length * dim)
  features.forEach((row, i) => flat.set(row, i * dim))
  writeEmbeddings(job.outPath, labels, flat, dim, dataset.classNames.length)

  const metadata = {
    model: backbone.name,
    feature_dim: dim,
    resolution: job.resolution,
    batch_size: job.batchSize,
    pixel_scaling: 'rgb / 255 to [0,1]',
    resize: 'bilinear to resolution x resolution',
    class_names: dataset.classNames,
    records: labels.length,
    skipped,
  }
  writeFileSync(job.outPath + '.meta.json', JSON.stringify(metadata, null, 2) + '\n')

  backbone.dispose()
  return {
    count: labels.length,
    dim,
    numClasses: dataset.classNames.length,
    classNames: dataset.classNames,
    skipped,
  }
}
