#!/usr/bin/env node
import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';
import { renderEnergyTraces } from './traces';
import { summarizeConservation } from './summary';

yargs(hideBin(process.argv))
  .scriptName('plot')
  .command(
    'traces <csvs...>',
    'render diagnostics columns as an SVG line chart',
    (y) =>
      y
        .positional('csvs', { type: 'string', array: true, demandOption: true })
        .option('column', {
          type: 'string',
          array: true,
          default: ['energy_error'],
          describe: 'diagnostics column(s) to draw',
        })
        .option('log', { type: 'boolean', default: false, describe: 'log-scale y axis' })
        .option('out', { type: 'string', default: 'traces.svg', describe: 'output SVG path' }),
    (argv) => {
      renderEnergyTraces(argv.csvs as string[], argv.column, argv.log, argv.out);
      console.log(`wrote ${argv.out}`);
    },
  )
  .command(
    'summary [csvs...]',
    'print a conservation table over run CSVs',
    (y) => y.positional('csvs', { type: 'string', array: true, default: [] as string[] }),
    (argv) => {
      process.stdout.write(summarizeConservation(argv.csvs as string[]));
    },
  )
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    console.error(err ? err.message : msg);
    process.exit(1);
  })
  .parse();
