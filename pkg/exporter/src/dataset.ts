/**
 * Class-labeled image datasets laid out as one subdirectory per class.
 * Label indices are a pure function of the sorted class-directory names;
 * records are ordered by class name, then file name.
 */

import { readdirSync, statSync } from 'fs'
import { extname, join } from 'path'

import { SUPPORTED_EXTENSIONS } from './images'

export interface DatasetEntry {
  path: string
  className: string
  label: number
}

export interface DatasetIndex {
  classNames: string[] // sorted; index == label
  entries: DatasetEntry[] // class-major, file-name order within a class
}

export function indexDataset(root: string): DatasetIndex {
  const classNames = readdirSync(root)
    .filter((name) => statSync(join(root, name)).isDirectory())
    .sort()
  if (classNames.length === 0) {
    throw new Error(`no class directories under ${root}`)
  }
  const entries: DatasetEntry[] = []
  classNames.forEach((className, label) => {
    const dir = join(root, className)
    const files = readdirSync(dir)
      .filter((name) => SUPPORTED_EXTENSIONS.includes(extname(name).toLowerCase()))
      .sort()
    if (files.length === 0) {
      throw new Error(`class ${className} has no images`)
    }
    for (const file of files) {
      entries.push({ path: join(dir, file), className, label })
    }
  })
  return { classNames, entries }
}
