"""
Run configuration: JSON schema validation, preset layering, config hashing and the named
random streams every stage draws from.
"""
import copy
import hashlib
import json

import attr
import deepdiff
import jsonschema
import numpy as np

import settings
from ractc.ractcbase import RactcDataError, RactcUsageError, canonical_json


# Hyperparameter presets
PRESETS = {
    'nyc': {'k1': 5, 'k2': 5, 'gamma1': 0.04, 'gamma2': 0.01},
    'chi': {'k1': 10, 'k2': 10, 'gamma1': 0.2, 'gamma2': 0.01},
    'custom': {},
}

VARIANTS = ['cluster', 'edge']
ABLATIONS = ['no_bb', 'no_attg', 'no_tran', 'no_com', 'no_comr', 'no_pop']
ACTIVATIONS = ['relu', 'sigmoid', 'tanh']

# Named random streams derived from the root seed
STREAM_CLUSTERING = 'clustering'
STREAM_INIT = 'init'
STREAM_NEGATIVE_SAMPLING = 'negative_sampling'
STREAM_SYNTH = 'synth'

DEFAULT_TRAIN = {
    'variant': 'cluster',
    'gamma1': 0.04,
    'gamma2': 0.01,
    'k1': 5,
    'k2': 5,
    'window': 5,
    'batch': 32,
    'lr': 0.001,
    'epochs': 200,
    'seed': settings.seed,
    'ablations': [],
    'aux_sign': 'minus',
    'embed_size': 128,
    'hyper_layers': 2,
    'gcn_layers': 2,
    'pop_layers': 1,
    'gcn_activation': 'relu',
    'pop_activation': 'sigmoid',
}

DEFAULT_DATA = {
    'regions': 'data/regions.csv',
    'attributes': 'data/attributes.csv',
    'attribute_vocab': 'data/attribute_vocab.csv',
    'trips': 'data/trips.csv',
    'region_map': None,
    't0': None,
    'tau': 3600,
    'frame_count': None,
    'timezone': settings.timezone,
}

_NUMBER = {'type': 'number'}
_NONNEG = {'type': 'number', 'minimum': 0}
_POS_INT = {'type': 'integer', 'minimum': 1}
_PATH = {'type': ['string', 'null']}

SYNTH_SCHEMA = {
    'type': 'object',
    'additionalProperties': False,
    'properties': {
        'days': _POS_INT,
        'tau': _POS_INT,
        'seed': {'type': 'integer', 'minimum': 0},
        'city': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'n_regions': _POS_INT,
                'grid_side': _POS_INT,
                'origin_lat': _NUMBER,
                'origin_lon': _NUMBER,
                'cell_degrees': {'type': 'number', 'exclusiveMinimum': 0},
                'jitter': _NONNEG,
                'attribute_names': {'type': 'array', 'items': {'type': 'string'}, 'minItems': 1},
                'attributes_per_region': _POS_INT,
                'archetypes': {
                    'type': 'object',
                    'additionalProperties': {'type': 'array', 'items': _NONNEG, 'minItems': 1},
                },
                'archetype_weights': {'type': 'object', 'additionalProperties': _NONNEG},
                'population_log_mean': _NUMBER,
                'population_log_sigma': _NONNEG,
            },
        },
        'process': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'base_rate': _NONNEG,
                'a': _NUMBER,
                'b': _NUMBER,
                'c': _NUMBER,
                'start': {'type': 'integer'},
                'profiles': {
                    'type': 'object',
                    'additionalProperties': {'type': 'array', 'items': _NONNEG,
                                             'minItems': 24, 'maxItems': 24},
                },
                'weekend_profiles': {
                    'type': ['object', 'null'],
                    'additionalProperties': {'type': 'array', 'items': _NONNEG,
                                             'minItems': 24, 'maxItems': 24},
                },
                'default_profile': {'type': 'array', 'items': _NONNEG,
                                    'minItems': 24, 'maxItems': 24},
                'weekday_factors': {'type': 'array', 'items': _NONNEG,
                                    'minItems': 7, 'maxItems': 7},
            },
        },
    },
}

RUN_CONFIG_SCHEMA = {
    'type': 'object',
    'additionalProperties': False,
    'properties': {
        'preset': {'enum': list(PRESETS)},
        'output_dir': {'type': 'string'},
        'data': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'regions': {'type': 'string'},
                'attributes': {'type': 'string'},
                'attribute_vocab': _PATH,
                'trips': {'type': 'string'},
                'region_map': _PATH,
                't0': {'type': ['integer', 'null']},
                'tau': _POS_INT,
                'frame_count': {'type': ['integer', 'null'], 'minimum': 1},
                'timezone': {'type': 'string'},
            },
        },
        'train': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'variant': {'enum': VARIANTS},
                'gamma1': _NONNEG,
                'gamma2': _NONNEG,
                'k1': _POS_INT,
                'k2': _POS_INT,
                'window': _POS_INT,
                'batch': _POS_INT,
                'lr': _NONNEG,
                'epochs': _POS_INT,
                'seed': {'type': 'integer', 'minimum': 0},
                'ablations': {'type': 'array', 'items': {'enum': ABLATIONS}, 'uniqueItems': True},
                'aux_sign': {'enum': ['minus', 'plus']},
                'embed_size': _POS_INT,
                'hyper_layers': _POS_INT,
                'gcn_layers': _POS_INT,
                'pop_layers': _POS_INT,
                'gcn_activation': {'enum': ACTIVATIONS},
                'pop_activation': {'enum': ACTIVATIONS},
            },
        },
        'synth': SYNTH_SCHEMA,
    },
}


def _validate_choice(name, choices):
    def validator(instance, attribute, value):
        if value not in choices:
            raise RactcUsageError('ERROR: %s must be one of %s, got "%s"' % (
                name, ', '.join(choices), value))
    return validator


def _validate_nonnegative(instance, attribute, value):
    if value < 0:
        raise RactcUsageError('ERROR: %s must be >= 0, got %s' % (attribute.name, value))


def _validate_ablations(instance, attribute, value):
    unknown = sorted(set(value) - set(ABLATIONS))
    if unknown:
        raise RactcUsageError('ERROR: Unknown ablation flags: %s' % ', '.join(unknown))


@attr.s(frozen=True)
class TrainConfig(object):
    """ Hyperparameters of one training run """
    variant = attr.ib(default='cluster', validator=_validate_choice('variant', VARIANTS))
    gamma1 = attr.ib(default=0.04, converter=float, validator=_validate_nonnegative)
    gamma2 = attr.ib(default=0.01, converter=float, validator=_validate_nonnegative)
    k1 = attr.ib(default=5, converter=int)
    k2 = attr.ib(default=5, converter=int)
    window = attr.ib(default=5, converter=int)
    batch = attr.ib(default=32, converter=int)
    lr = attr.ib(default=0.001, converter=float, validator=_validate_nonnegative)
    epochs = attr.ib(default=200, converter=int)
    seed = attr.ib(default=0, converter=int, validator=_validate_nonnegative)
    ablations = attr.ib(default=frozenset(), converter=frozenset, validator=_validate_ablations)
    aux_sign = attr.ib(default='minus', validator=_validate_choice('aux_sign', ['minus', 'plus']))
    embed_size = attr.ib(default=128, converter=int)
    hyper_layers = attr.ib(default=2, converter=int)
    gcn_layers = attr.ib(default=2, converter=int)
    pop_layers = attr.ib(default=1, converter=int)
    gcn_activation = attr.ib(default='relu', validator=_validate_choice('gcn_activation', ACTIVATIONS))
    pop_activation = attr.ib(default='sigmoid',
                             validator=_validate_choice('pop_activation', ACTIVATIONS))

    @property
    def gamma(self):
        """ Loss weight of the active auxiliary task """
        return self.gamma1 if self.variant == 'cluster' else self.gamma2

    def ablated(self, flag):
        return flag in self.ablations

    def to_dict(self):
        document = attr.asdict(self)
        document['ablations'] = sorted(self.ablations)
        return document

    @classmethod
    def from_dict(cls, document):
        return cls(**document)


class RunConfig(object):
    """ A validated, fully layered run configuration """

    def __init__(self, document, source=None):
        self.document = document
        self.source = source
        self.train = TrainConfig.from_dict(document['train'])

    @property
    def preset(self):
        return self.document.get('preset', 'custom')

    @property
    def output_dir(self):
        return self.document['output_dir']

    @property
    def data(self):
        return self.document['data']

    @property
    def synth(self):
        return self.document.get('synth', {})

    def model_section(self):
        """ The part of the configuration a trained model depends on """
        return {
            'train': self.train.to_dict(),
            'tau': self.data['tau'],
            'timezone': self.data['timezone'],
        }

    def config_hash(self):
        return config_hash(self.model_section())

    def with_train(self, **changes):
        """ Return a copy with some training fields replaced """
        document = copy.deepcopy(self.document)
        document['train'].update(changes)
        if 'ablations' in changes:
            document['train']['ablations'] = sorted(changes['ablations'])
        return RunConfig(document, source=self.source)


def _validate_document(document, where, schema=RUN_CONFIG_SCHEMA):
    validator = jsonschema.Draft7Validator(schema)
    errors = sorted(validator.iter_errors(document), key=lambda err: list(err.absolute_path))
    if errors:
        messages = ['%s: %s' % ('/'.join(str(p) for p in err.absolute_path) or '(root)',
                                err.message) for err in errors]
        raise RactcUsageError('ERROR: Invalid configuration %s: %s' % (where, '; '.join(messages)))


def resolve_run_config(document=None, overrides=None, source='(inline)'):
    """
    Layer built-in defaults < preset < document < overrides and validate the result.
    :param document: parsed configuration document (dict)
    :param overrides: dict with optional keys preset, variant, seed, ablations, output_dir
    :return: RunConfig
    """
    document = copy.deepcopy(document or {})
    overrides = overrides or {}
    _validate_document(document, 'in %s' % source)

    preset = overrides.get('preset') or document.get('preset') or 'custom'
    train = dict(DEFAULT_TRAIN)
    train.update(PRESETS[preset])
    train.update(document.get('train', {}))
    for key in ('variant', 'seed'):
        if overrides.get(key) is not None:
            train[key] = overrides[key]
    if overrides.get('ablations'):
        train['ablations'] = sorted(set(train['ablations']) | set(overrides['ablations']))
    data = dict(DEFAULT_DATA)
    data.update(document.get('data', {}))

    resolved = {
        'preset': preset,
        'output_dir': (overrides.get('output_dir') or document.get('output_dir') or
                       settings.output_dir),
        'data': data,
        'train': train,
    }
    if 'synth' in document:
        resolved['synth'] = document['synth']
    _validate_document(resolved, 'after applying preset "%s" and overrides' % preset)
    return RunConfig(resolved, source=source)


def load_run_config(path, overrides=None):
    """ Read a JSON configuration file and resolve it """
    try:
        with open(path) as config_file:
            document = json.load(config_file)
    except IOError as err:
        raise RactcDataError('ERROR: Unable to read configuration "%s": %s' % (path, err))
    except ValueError as err:
        raise RactcUsageError('ERROR: Configuration "%s" is not valid JSON: %s' % (path, err))
    return resolve_run_config(document, overrides=overrides, source=path)


def load_synth_document(path):
    """
    Read a synthetic-city document: either a bare synth section or a run configuration
    holding one under "synth".
    """
    try:
        with open(path) as spec_file:
            document = json.load(spec_file)
    except IOError as err:
        raise RactcDataError('ERROR: Unable to read synth spec "%s": %s' % (path, err))
    except ValueError as err:
        raise RactcUsageError('ERROR: Synth spec "%s" is not valid JSON: %s' % (path, err))
    if isinstance(document, dict) and 'synth' in document:
        return resolve_run_config(document, source=path).synth
    _validate_document(document, 'in %s' % path, schema=SYNTH_SCHEMA)
    return document


def config_hash(section):
    """ SHA-256 of the canonical JSON of a configuration section """
    return hashlib.sha256(canonical_json(section).encode('utf-8')).hexdigest()


def describe_config_mismatch(stored, current):
    """ Human-readable summary of the differences between two configuration sections """
    diff = deepdiff.DeepDiff(stored, current, ignore_order=True)
    if not diff:
        return 'no differences in the model configuration'
    lines = []
    for change_type in sorted(diff):
        lines.append('%s: %s' % (change_type, diff[change_type]))
    return '; '.join(lines)


def stream_key(name):
    """ Stable 64-bit integer for a stream name """
    return int(hashlib.sha256(name.encode('utf-8')).hexdigest()[:16], 16)


def derive_rng(root_seed, stream_name):
    """
    Return an independent, reproducible generator for a named stream of a root seed,
    e.g. derive_rng(7, 'negative_sampling') or derive_rng(7, 'synth/3/14').
    """
    if root_seed < 0:
        raise RactcUsageError('ERROR: Seeds must be nonnegative, got %s' % root_seed)
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), stream_key(stream_name)]))
