"""
Pipeline stages behind the odr command: synth, prepare, train, evaluate, baseline,
dump-attention and sweep. Each stage is a RactcBase subclass with a run() method that
writes its artifacts and returns a JSON-serializable summary.
"""
import collections
import csv
import json
import os

import numpy as np

import constants
from ractc import synth
from ractc.autodiff import CheckpointMismatchError, checkpoint_fingerprint, load_checkpoint
from ractc.baselines import BaselineSuite
from ractc.dataset import DatasetBuilder, build_dataset
from ractc.head import evaluate, target_indices
from ractc.ractcbase import RactcBase, RactcDataError
from ractc.ractcmodel import RactcModel
from ractc.ractctrain import RactcTrainer, format_value, write_training_outputs
from ractc.runconfig import describe_config_mismatch
from ractc.transform import write_attention_csv


def run_name(train_config):
    """ Folder name of a training run, e.g. cluster-no_bb-seed0 """
    parts = [train_config.variant] + sorted(train_config.ablations) + [
        'seed%s' % train_config.seed]
    return '-'.join(parts)


def write_json(path, document):
    with open(path, 'w') as output_file:
        json.dump(document, output_file, indent=2, sort_keys=True)
        output_file.write('\n')


class RactcStage(RactcBase):
    """ A pipeline stage bound to a resolved RunConfig """

    def __init__(self, run_config, dataset=None, verbosity=None):
        RactcBase.__init__(self, verbosity=verbosity)
        self.run_config = run_config
        self._dataset = dataset

    @property
    def train_dir(self):
        return os.path.join(self.run_config.output_dir, constants.TRAIN_SUBFOLDER,
                            run_name(self.run_config.train))

    def builder(self):
        return DatasetBuilder(self.run_config, verbosity=self.verbosity)

    @property
    def dataset(self):
        """ The prepared dataset, loaded from the prepared folder on first use """
        if self._dataset is None:
            self._dataset = self.builder().load()
        return self._dataset

    def dataset_files(self):
        """ (key, path) of every file the loaded dataset was read from """
        builder = self.builder()
        files = builder.input_files()
        series = os.path.join(builder.prepared_dir, constants.FILENAME_OD_SERIES)
        if os.path.isfile(series):
            files.append(('od_series', series))
        return files

    def load_model(self, checkpoint):
        """
        Load a checkpoint, refusing it unless it was trained with the current model
        configuration.
        :return: (RactcModel, ParameterStore, checkpoint manifest)
        """
        self.require_file(checkpoint)
        store, manifest = load_checkpoint(checkpoint)
        if manifest.get('config_hash') != self.run_config.config_hash():
            raise CheckpointMismatchError(
                'ERROR: Checkpoint "%s" was trained with another configuration (%s)' % (
                    checkpoint, describe_config_mismatch(manifest.get('config'),
                                                         self.run_config.model_section())))
        model = RactcModel(self.run_config.train, self.dataset)
        expected = model.init_store()
        if checkpoint_fingerprint(expected) != checkpoint_fingerprint(store):
            raise CheckpointMismatchError(
                'ERROR: Checkpoint "%s" parameter layout differs from the model in %s' % (
                    checkpoint, sorted(set(store.names()) ^ set(expected.names())) or 'shapes'))
        return model, store, manifest

    def default_checkpoint(self):
        return os.path.join(self.train_dir, constants.FILENAME_CHECKPOINT)


class SynthStage(RactcBase):
    """ Generate a synthetic city, its trips and the ground-truth intensities """

    def __init__(self, document, out_dir, verbosity=None):
        RactcBase.__init__(self, verbosity=verbosity)
        self.document = document
        self.out_dir = out_dir

    def run(self):
        document = self.document
        tau = document.get('tau', 3600)
        days = document.get('days', 14)
        city_spec = synth.city_spec_from_dict(document.get('city'), seed=document.get('seed'))
        process = synth.process_spec_from_dict(document.get('process'))
        self.log_settings(out_dir=self.out_dir, days=days, tau=tau, seed=city_spec.seed,
                          n_regions=city_spec.n_regions, grid_side=city_spec.grid_side)
        city = synth.generate_city(city_spec)
        trips = synth.generate_trips(city, process, days, tau=tau)
        self.ensure_directory(self.out_dir)
        synth.write_city(self.out_dir, city)
        synth.write_trips(os.path.join(self.out_dir, constants.FILENAME_TRIPS), trips)
        synth.write_ground_truth(os.path.join(self.out_dir, constants.FILENAME_GROUND_TRUTH),
                                 city, process)
        summary = collections.OrderedDict([
            ('regions', len(city.regions)),
            ('attributes', city.regions.attribute_count),
            ('days', days),
            ('frames', int(trips.tallies.shape[0])),
            ('trips', len(trips.trips)),
            ('expected_trips', synth.expected_trip_count(city, process, days, tau)),
            ('out_dir', self.out_dir),
        ])
        self.vlog(1, 'Wrote %s regions and %s trips to "%s"' % (
            summary['regions'], summary['trips'], self.out_dir))
        return summary


class PrepareStage(RactcStage):
    """ Build and cache the prepared artifacts """

    def run(self, force=False):
        builder = self.builder()
        written = builder.prepare(force=force)
        with open(os.path.join(builder.prepared_dir, constants.FILENAME_SPLIT)) as split_file:
            split = json.load(split_file)
        return collections.OrderedDict([
            ('prepared_dir', builder.prepared_dir),
            ('written', written),
            ('split', split['sizes']),
        ])


class TrainStage(RactcStage):
    """ Train one model and write history, attention history, checkpoint and manifest """

    def run(self):
        trainer = RactcTrainer(self.run_config.train, self.dataset, verbosity=self.verbosity)
        result = trainer.train()
        checkpoint = write_training_outputs(self.train_dir, self.run_config, result,
                                            self.dataset_files())
        self.vlog(1, 'Wrote checkpoint "%s"' % checkpoint)
        return collections.OrderedDict([
            ('checkpoint', checkpoint),
            ('best_epoch', result.best_epoch),
            ('best_val_rmse', result.best_val_rmse),
            ('optimizer_steps', result.steps),
        ])


class EvaluateStage(RactcStage):
    """ Metrics of a trained checkpoint on the test split """

    def run(self, checkpoint=None):
        checkpoint = checkpoint or self.default_checkpoint()
        model, store, _ = self.load_model(checkpoint)
        config = self.run_config.train
        targets = target_indices(self.dataset.split.test, config.window)
        if not targets:
            raise RactcDataError('ERROR: The test split %s holds no target frame after a '
                                 'window of %s' % (self.dataset.split.test, config.window))
        predictions = model.predict_frames(store, targets)
        report = evaluate(predictions, self.dataset.frames[targets])
        document = report.to_dict(model='ractc', variant=config.variant, seed=config.seed)
        write_json(os.path.join(os.path.dirname(checkpoint), constants.FILENAME_METRICS), document)
        self.vlog(1, 'Test RMSE %s over %s frames' % (report.rmse, report.frames))
        return document


class BaselineStage(RactcStage):
    """ Metrics of HA, GM, IOM and RM on the test split """

    def run(self, models):
        suite = BaselineSuite(self.dataset)
        config = self.run_config.train
        targets = target_indices(self.dataset.split.test, config.window)
        if not targets:
            raise RactcDataError('ERROR: The test split %s holds no target frame after a '
                                 'window of %s' % (self.dataset.split.test, config.window))
        out_dir = self.ensure_directory(os.path.join(self.run_config.output_dir,
                                                     constants.BASELINE_SUBFOLDER))
        observed = self.dataset.frames[targets]
        reports = []
        for model in models:
            report = evaluate(suite.predict_frames(model, targets), observed)
            document = report.to_dict(model=model, variant=None, seed=config.seed)
            write_json(os.path.join(out_dir, '%s.json' % model), document)
            self.vlog(1, '%s: RMSE %s %s' % (model, report.rmse, suite.fit_report(model) or ''))
            reports.append(document)
        return reports


class AttentionDumpStage(RactcStage):
    """ Write the hour x attribute attention matrix of a checkpoint """

    def run(self, hours, checkpoint=None, out=None):
        checkpoint = checkpoint or self.default_checkpoint()
        model, store, _ = self.load_model(checkpoint)
        out = out or os.path.join(os.path.dirname(checkpoint), constants.FILENAME_ATTENTION_DUMP)
        write_attention_csv(out, model.attention_weights(store, hours),
                            self.dataset.regions.attribute_names)
        self.vlog(1, 'Wrote attention weights of %s hours to "%s"' % (len(hours), out))
        return collections.OrderedDict([('path', out), ('hours', list(hours))])


class SweepStage(RactcStage):
    """
    Train and evaluate one run per (value, seed) of a swept hyperparameter.
    Clustering and population levels depend on k1, k2 and the seed, so every run rebuilds
    its dataset in memory from the parsed inputs instead of reading the prepared cache.
    """

    def run(self, param, values, seeds):
        builder = self.builder()
        regions = builder.read_region_table()
        series = builder.build_series(builder.read_trips(len(regions)), len(regions))
        rows = []
        for value in values:
            value = int(value) if param in ('k1', 'k2') else float(value)
            for seed in seeds:
                run_config = self.run_config.with_train(**{param: value, 'seed': seed})
                config = run_config.train
                self.vlog(1, 'Sweep %s=%s seed %s' % (param, value, seed))
                dataset = build_dataset(regions, series, config.k1, config.k2, config.seed,
                                        timezone=run_config.data['timezone'],
                                        with_population=not config.ablated('no_pop'))
                trainer = RactcTrainer(config, dataset, verbosity=self.verbosity - 1)
                result = trainer.train()
                targets = target_indices(dataset.split.test, config.window)
                report = evaluate(trainer.model.predict_frames(result.store, targets),
                                  dataset.frames[targets])
                rows.append([param, value, seed] + list(report.as_tuple()))
        out_dir = self.ensure_directory(os.path.join(self.run_config.output_dir,
                                                     constants.SWEEP_SUBFOLDER))
        write_sweep(os.path.join(out_dir, constants.FILENAME_SWEEP), rows)
        summary = summarize_sweep(rows)
        write_sweep_summary(os.path.join(out_dir, constants.FILENAME_SWEEP_SUMMARY), summary)
        return collections.OrderedDict([('param', param), ('runs', len(rows)),
                                        ('out_dir', out_dir)])


def summarize_sweep(rows):
    """ Mean metrics per swept value: rows of (param, value, seeds, rmse, mae, smape, pcc) """
    grouped = collections.OrderedDict()
    for row in rows:
        grouped.setdefault((row[0], row[1]), []).append(row[3:])
    summary = []
    for (param, value), metrics in grouped.items():
        means = np.mean(np.array(metrics, dtype=np.float64), axis=0)
        summary.append([param, value, len(metrics)] + [float(mean) for mean in means])
    return summary


def write_sweep(path, rows):
    _write_table(path, constants.HEADER_SWEEP, rows)


def write_sweep_summary(path, rows):
    _write_table(path, constants.HEADER_SWEEP_SUMMARY, rows)


def _write_table(path, header, rows):
    with open(path, 'w', newline='') as output_file:
        writer = csv.writer(output_file, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])

