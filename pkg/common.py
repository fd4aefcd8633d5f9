""" Common methods and functions for the RACTC command-line tools """
import argparse


# Script constants
APP_VERSION = '1.0.0'
PRESETS = ['nyc', 'chi', 'custom']
VARIANTS = ['cluster', 'edge']
ABLATIONS = ['no_bb', 'no_attg', 'no_tran', 'no_com', 'no_comr', 'no_pop']
BASELINE_MODELS = ['ha', 'gm', 'iom', 'rm']
SWEEP_PARAMS = ['k1', 'k2', 'gamma1', 'gamma2']


# Argument parser validation functions
def preset_name(string):
    """ Return the preset name if it is one of the known presets """
    if string not in PRESETS:
        raise argparse.ArgumentTypeError('Argument "preset" must be %s' % ', '.join(PRESETS))
    return string


def variant_name(string):
    """ Return the model variant if it is one of the known variants """
    if string not in VARIANTS:
        raise argparse.ArgumentTypeError('Argument "variant" must be %s' % ', '.join(VARIANTS))
    return string


def ablation_flag(string):
    """ Return the ablation flag if it is one of the known flags """
    if string not in ABLATIONS:
        raise argparse.ArgumentTypeError('Argument "ablate" must be %s' % ', '.join(ABLATIONS))
    return string


def baseline_model(string):
    """ Return the baseline model key; 'all' expands to every baseline """
    if string == 'all':
        return list(BASELINE_MODELS)
    if string not in BASELINE_MODELS:
        raise argparse.ArgumentTypeError('Argument "model" must be all, %s' % ', '.join(
            BASELINE_MODELS))
    return [string]


def sweep_param(string):
    """ Return the name of a hyperparameter that may be swept """
    if string not in SWEEP_PARAMS:
        raise argparse.ArgumentTypeError('Argument "param" must be %s' % ', '.join(SWEEP_PARAMS))
    return string


def seed_value(string):
    """ Return a nonnegative integer seed """
    try:
        value = int(string)
    except ValueError:
        raise argparse.ArgumentTypeError('Argument "seed" must be an integer, got "%s"' % string)
    if value < 0:
        raise argparse.ArgumentTypeError('Argument "seed" must be nonnegative, got %s' % value)
    return value


def number_list(string):
    """ Parse a comma-separated list of numbers, e.g. '5,10,15' """
    try:
        return [float(value) for value in string.split(',') if value.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('Expected a comma-separated list of numbers, got "%s"' % (
            string))


def seed_list(string):
    """ Parse a comma-separated list of seeds """
    return [seed_value(value) for value in string.split(',') if value.strip()]


def hour_list(string):
    """ Parse a comma-separated list of hours of the day; 'all' returns 0..23 """
    if string == 'all':
        return list(range(24))
    hours = []
    for value in string.split(','):
        if not value.strip():
            continue
        try:
            hour = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError('Hours must be integers in 0..23, got "%s"' % value)
        if not 0 <= hour <= 23:
            raise argparse.ArgumentTypeError('Hours must be integers in 0..23, got %s' % hour)
        hours.append(hour)
    return hours
