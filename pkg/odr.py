"""
Command-line entry point of the RACTC OD demand forecasting pipeline.

Example Usage:
* Generate a synthetic city and its trips:
    python odr.py synth --config synth.json --out data
* Prepare the dataset, train and evaluate RACTC-Cluster with the NYC preset:
    python odr.py prepare --config run.json --preset nyc
    python odr.py train --config run.json --preset nyc
    python odr.py evaluate --config run.json --preset nyc
* Train an ablated edge variant:
    python odr.py train --config run.json --variant edge --ablate no_bb --seed 3
* Evaluate the physical baselines:
    python odr.py baseline --config run.json --model all
* Dump the attention weights of hours 8 and 18:
    python odr.py dump-attention --config run.json --hours 8,18
* Sweep k2 over three values and two seeds:
    python odr.py sweep --config run.json --param k2 --values 5,10,15 --seeds 0,1
* To see all options:
    python odr.py -h
"""
import argparse
import json
import sys

import common
import constants
from ractc import pipeline
from ractc.ractcbase import RactcError
from ractc.runconfig import load_run_config, load_synth_document


class UsageExitArgumentParser(argparse.ArgumentParser):
    """ ArgumentParser that exits with the usage exit code instead of argparse's 2 """

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write('%s: error: %s\n' % (self.prog, message))
        sys.exit(constants.EXIT_USAGE)


def build_parser():
    run_options = argparse.ArgumentParser(add_help=False)
    run_options.add_argument('-c', '--config', help='Run configuration JSON file', required=True)
    run_options.add_argument('--preset', help='Hyperparameter preset: nyc, chi, custom',
                             type=common.preset_name)
    run_options.add_argument('--variant', help='Model variant: cluster, edge',
                             type=common.variant_name)
    run_options.add_argument('--ablate', help='Ablation flag, repeatable: %s' % ', '.join(
        common.ABLATIONS), type=common.ablation_flag, action='append', default=[])
    run_options.add_argument('--seed', help='Root seed of every random stream',
                             type=common.seed_value)
    run_options.add_argument('--output_dir', help='Overrides the output directory of the config')
    run_options.add_argument('-v', '--verbosity', help='Verbosity level: 0, 1 (default), 2 or 3',
                             default=1, type=int)

    parser = UsageExitArgumentParser('odr', description='RACTC OD demand forecasting')
    parser.add_argument('--version', action='version', version='%(prog)s v' + common.APP_VERSION)
    commands = parser.add_subparsers(dest='command', parser_class=UsageExitArgumentParser)
    commands.required = True

    synth = commands.add_parser('synth', help='Generate a synthetic city, trips and ground truth')
    synth.add_argument('-c', '--config', help='Synth spec JSON (or a run config with "synth")',
                       required=True)
    synth.add_argument('--out', help='Output directory (default: data)', default='data')
    synth.add_argument('-v', '--verbosity', help='Verbosity level', default=1, type=int)

    prepare = commands.add_parser('prepare', parents=[run_options],
                                  help='Build the prepared dataset artifacts')
    prepare.add_argument('--force', help='Rebuild even if the artifacts are current',
                         action='store_true')

    commands.add_parser('train', parents=[run_options], help='Train a model')

    evaluate = commands.add_parser('evaluate', parents=[run_options],
                                   help='Evaluate a checkpoint on the test split')
    evaluate.add_argument('--checkpoint', help='Checkpoint (default: the run folder of the config)')

    baseline = commands.add_parser('baseline', parents=[run_options],
                                   help='Evaluate HA, GM, IOM and RM on the test split')
    baseline.add_argument('--model', help='Baseline: all (default), ha, gm, iom, rm',
                          type=common.baseline_model, default=list(common.BASELINE_MODELS))

    dump = commands.add_parser('dump-attention', parents=[run_options],
                               help='Write the hour x attribute attention weights')
    dump.add_argument('--checkpoint', help='Checkpoint (default: the run folder of the config)')
    dump.add_argument('--hours', help='Comma-separated hours or "all" (default)',
                      type=common.hour_list, default=list(range(24)))
    dump.add_argument('--out', help='Output CSV (default: attention.csv next to the checkpoint)')

    sweep = commands.add_parser('sweep', parents=[run_options],
                                help='Train and evaluate over hyperparameter values and seeds')
    sweep.add_argument('--param', help='Swept parameter: k1, k2, gamma1, gamma2',
                       type=common.sweep_param, required=True)
    sweep.add_argument('--values', help='Comma-separated values', type=common.number_list,
                       required=True)
    sweep.add_argument('--seeds', help='Comma-separated seeds (default: 0)',
                       type=common.seed_list, default=[0])
    return parser


def run_command(args):
    """ Run the selected command and return its JSON-serializable summary """
    if args.command == 'synth':
        document = load_synth_document(args.config)
        return pipeline.SynthStage(document, args.out, verbosity=args.verbosity).run()

    run_config = load_run_config(args.config, overrides={
        'preset': args.preset,
        'variant': args.variant,
        'seed': args.seed,
        'ablations': args.ablate,
        'output_dir': args.output_dir,
    })
    if args.command == 'prepare':
        return pipeline.PrepareStage(run_config, verbosity=args.verbosity).run(force=args.force)
    if args.command == 'train':
        return pipeline.TrainStage(run_config, verbosity=args.verbosity).run()
    if args.command == 'evaluate':
        return pipeline.EvaluateStage(run_config, verbosity=args.verbosity).run(
            checkpoint=args.checkpoint)
    if args.command == 'baseline':
        return pipeline.BaselineStage(run_config, verbosity=args.verbosity).run(args.model)
    if args.command == 'dump-attention':
        return pipeline.AttentionDumpStage(run_config, verbosity=args.verbosity).run(
            args.hours, checkpoint=args.checkpoint, out=args.out)
    return pipeline.SweepStage(run_config, verbosity=args.verbosity).run(
        args.param, args.values, args.seeds)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.verbosity > 2:
        print(args)
    try:
        summary = run_command(args)
    except RactcError as err:
        output = {
            constants.RESPONSE_FIELD_STATUS: constants.STATUS_ERROR,
            constants.RESPONSE_FIELD_TYPE: err.__class__.__name__,
            constants.RESPONSE_FIELD_MESSAGE: str(err),
        }
        print(json.dumps(output))
        return err.exit_code
    print(json.dumps(summary, indent=2))
    return constants.EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
