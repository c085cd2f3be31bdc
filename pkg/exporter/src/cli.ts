/**
 * export --data <dir> --model <name> --out <file> --resolution {64|256} --batch <n>
 */

import { parseArgs } from 'node:util'

import { runExport } from './export'
import { SEEDED_CONV } from './model'

async function main(): Promise<number> {
  const { values, positionals } = parseArgs({
    allowPositionals: true,
    options: {
      data: { type: 'string' },
      model: { type: 'string', default: SEEDED_CONV },
      out: { type: 'string' },
      resolution: { type: 'string', default: '64' },
      batch: { type: 'string', default: '32' },
    },
  })

  if (positionals[0] !== 'export' || !values.data || !values.out) {
    console.error('usage: export --data <dir> --model <name> --out <file> ' +
      '--resolution {64|256} --batch <n>')
    return 2
  }
  const resolution = parseInt(values.resolution!, 10)
  if (resolution !== 64 && resolution !== 256) {
    console.error('resolution must be 64 or 256')
    return 2
  }

  const result = await runExport({
    dataDir: values.data,
    model: values.model!,
    outPath: values.out,
    resolution,
    batchSize: parseInt(values.batch!, 10),
  })
  console.log(`wrote ${result.count} records (dim=${result.dim}, ` +
    `classes=${result.numClasses}) to ${values.out}`)
  if (result.skipped.length > 0) {
    console.log(`skipped ${result.skipped.length} unreadable image(s)`)
  }
  return 0
}

main().then((code) => { process.exitCode = code })
