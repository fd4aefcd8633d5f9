"""
Training loop: chronological split, batches of consecutive target frames with gradient
accumulation, one Adam step per batch, validation after every epoch and retention of the
best-validation parameters.
"""
import collections
import csv
import datetime
import json
import math
import os
import warnings

import attr
import numpy as np

import constants
from ractc.autodiff import Tape, adam_step, save_checkpoint
from ractc.head import evaluate, target_indices
from ractc.ractcbase import RactcBase, RactcDataError, sha256_file
from ractc.ractcmodel import RactcModel
from ractc.runconfig import STREAM_CLUSTERING, STREAM_INIT, STREAM_NEGATIVE_SAMPLING, derive_rng
from utils.timer import Timer


@attr.s(eq=False)
class TrainResult(object):
    """ Best store, per-epoch history rows and per-(epoch, hour) attention weights """
    store = attr.ib()
    history = attr.ib(factory=list)
    attention_history = attr.ib(factory=list)
    best_epoch = attr.ib(default=None)
    best_val_rmse = attr.ib(default=None)
    steps = attr.ib(default=0)
    timings = attr.ib(factory=dict)


def batches(targets, size):
    """ Consecutive chunks of at most `size` targets, in order """
    return [targets[start:start + size] for start in range(0, len(targets), size)]


def format_value(value):
    """ repr for floats, empty for missing values """
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    return repr(float(value)) if isinstance(value, float) else str(value)


class RactcTrainer(RactcBase):
    """ Trains one RACTC model on a prepared dataset """

    def __init__(self, train_config, dataset, verbosity=None):
        RactcBase.__init__(self, verbosity=verbosity)
        self.config = train_config
        self.dataset = dataset
        self.model = RactcModel(train_config, dataset)
        self.train_targets = target_indices(dataset.split.train, train_config.window)
        self.val_targets = target_indices(dataset.split.validation, train_config.window)
        if not self.train_targets:
            raise RactcDataError(
                'ERROR: The training split %s holds no target frame after a window of %s' % (
                    dataset.split.train, train_config.window))

    def log_settings(self, **extra):
        RactcBase.log_settings(self, regions=self.dataset.region_count,
                               frames=self.dataset.series.frame_count,
                               train_targets=len(self.train_targets),
                               val_targets=len(self.val_targets), **dict(
                                   self.config.to_dict(), **extra))

    def train_epoch(self, store, rng):
        """
        One pass over the training targets.
        :return: (mean total loss over targets, optimizer steps taken)
        """
        losses = []
        steps = 0
        for batch in batches(self.train_targets, self.config.batch):
            store.zero_grad()
            for k in batch:
                tape = Tape(store)
                result = self.model.forward(tape, k, rng=rng)
                store.accumulate(tape.backward(result.total), weight=1.0 / len(batch))
                losses.append(float(result.total.value))
            adam_step(store, store.gradients(), lr=self.config.lr)
            steps += 1
            self.vlog(3, 'batch %s: targets %s..%s, mean loss %s' % (
                steps, batch[0], batch[-1], np.mean(losses[-len(batch):])))
        return float(np.mean(losses)), steps

    def validate(self, store):
        if not self.val_targets:
            return None
        predictions = self.model.predict_frames(store, self.val_targets)
        return evaluate(predictions, self.dataset.frames[self.val_targets])

    def train(self):
        """ Run all epochs and return a TrainResult holding the best-validation store """
        config = self.config
        self.log_settings()
        store = self.model.init_store(derive_rng(config.seed, STREAM_INIT))
        rng = derive_rng(config.seed, STREAM_NEGATIVE_SAMPLING)
        self.vlog(1, 'Training %s parameters in %s entries' % (store.parameter_count(), len(store)))
        result = TrainResult(store=store)
        best_values = None
        timer = Timer()
        timer.start()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            for epoch in range(1, config.epochs + 1):
                train_loss, steps = self.train_epoch(store, rng)
                result.steps += steps
                metrics = self.validate(store)
                result.history.append([
                    epoch, train_loss,
                    metrics.rmse if metrics else None, metrics.mae if metrics else None,
                    metrics.smape if metrics else None, metrics.pcc if metrics else None])
                for hour, alpha in self.model.attention_weights(store):
                    result.attention_history.append((epoch, hour, alpha))
                if metrics is None or result.best_val_rmse is None or \
                        metrics.rmse < result.best_val_rmse:
                    result.best_epoch = epoch
                    result.best_val_rmse = metrics.rmse if metrics else None
                    best_values = store.values()
                seconds = timer.lap('epoch %s' % epoch)
                self.vlog(2, 'epoch %s: train_loss %s, val_rmse %s (%.2fs)' % (
                    epoch, train_loss, metrics.rmse if metrics else '-', seconds))
        self.log_warnings(caught[:20])
        timer.stop()
        store.load_values(best_values)
        result.timings = timer.to_dict()
        self.vlog(1, 'Best epoch %s of %s (val_rmse %s), %s optimizer steps' % (
            result.best_epoch, config.epochs, result.best_val_rmse, result.steps))
        return result


def write_history(path, rows):
    """ Per-epoch history CSV; contains no timing so identical runs give identical files """
    with open(path, 'w', newline='') as output_file:
        writer = csv.writer(output_file, lineterminator='\n')
        writer.writerow(constants.HEADER_HISTORY)
        for row in rows:
            writer.writerow([format_value(value) for value in row])


def write_attention_history(path, rows):
    with open(path, 'w', newline='') as output_file:
        writer = csv.writer(output_file, lineterminator='\n')
        writer.writerow(constants.HEADER_ATTENTION_HISTORY)
        for epoch, hour, alpha in rows:
            for attribute_id, weight in enumerate(alpha):
                writer.writerow([epoch, hour, attribute_id, repr(float(weight))])


def write_training_outputs(train_dir, run_config, result, dataset_files):
    """
    Write history, attention history, checkpoint and run manifest.
    :param dataset_files: list of (key, path) of the inputs, hashed into the manifest
    :return: checkpoint path
    """
    RactcBase.ensure_directory(train_dir)
    config = run_config.train
    write_history(os.path.join(train_dir, constants.FILENAME_HISTORY), result.history)
    write_attention_history(os.path.join(train_dir, constants.FILENAME_ATTENTION_HISTORY),
                            result.attention_history)
    checkpoint = os.path.join(train_dir, constants.FILENAME_CHECKPOINT)
    save_checkpoint(checkpoint, result.store, config.seed, run_config.config_hash(),
                    config=run_config.model_section(),
                    extra={'best_epoch': result.best_epoch, 'variant': config.variant})
    manifest = collections.OrderedDict([
        ('seed', config.seed),
        ('config_hash', run_config.config_hash()),
        ('config', run_config.document),
        ('dataset', dict((key, sha256_file(path)) for key, path in dataset_files)),
        ('streams', [STREAM_CLUSTERING, STREAM_CLUSTERING + '/competition', STREAM_INIT,
                     STREAM_NEGATIVE_SAMPLING]),
        ('best_epoch', result.best_epoch),
        ('best_val_rmse', result.best_val_rmse),
        ('optimizer_steps', result.steps),
        ('wall_clock', {
            'created_at': datetime.datetime.utcnow().strftime('%Y-%m-%dT%H:%M:%SZ'),
            'timings': result.timings,
        }),
    ])
    with open(os.path.join(train_dir, constants.FILENAME_RUN_MANIFEST), 'w') as output_file:
        json.dump(manifest, output_file, indent=2)
    return checkpoint
