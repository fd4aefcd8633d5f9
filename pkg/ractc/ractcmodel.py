"""
Assembly of the full RACTC forward pass for one target frame, honoring the variant and the
ablation flags of a TrainConfig.
"""
import attr
import numpy as np

from ractc import capacity, competition, head, population, transform
from ractc.autodiff import ParameterStore, Tape
from ractc.ractcbase import RactcDataError
from ractc.runconfig import STREAM_INIT, STREAM_NEGATIVE_SAMPLING, derive_rng


TIME_TABLE = 'time.embed'


@attr.s(frozen=True)
class ForwardResult(object):
    """ Tensors of one target frame: prediction, losses and attention weights """
    yhat = attr.ib()
    od_loss = attr.ib()
    aux_loss = attr.ib()
    total = attr.ib()
    alpha = attr.ib(default=None)


class RactcModel(object):
    """
    Parameter layout and forward pass of RACTC over a PreparedDataset.

    Ablations:
      no_bb    the destination branch reuses the origin table, generator and recurrent cell
      no_attg  attribute convolution over the normalized co-occurrence graph
      no_tran  the generated transforms are replaced by the raw base matrices
      no_com   no auxiliary loss
      no_comr  auxiliary loss without gradient reversal
      no_pop   O'' = O'
    """

    def __init__(self, train_config, dataset):
        self.config = train_config
        self.dataset = dataset
        if train_config.window >= dataset.series.frame_count:
            raise RactcDataError('ERROR: %s frames cannot feed a window of %s plus a target' % (
                dataset.series.frame_count, train_config.window))
        if not train_config.ablated('no_pop') and dataset.population is None:
            raise RactcDataError('ERROR: The dataset was prepared without population levels')
        tied = train_config.ablated('no_bb')
        self.attribute_params = transform.AttributeEmbeddings(layers=train_config.hyper_layers)
        self.generator_o = transform.GeneratorParams('gen.origin')
        self.generator_d = self.generator_o if tied else transform.GeneratorParams('gen.destination')
        self.tables = capacity.EmbedTables(
            destination='origin.embed' if tied else 'destination.embed')
        self.recurrent_o = capacity.RecurrentParams('lstm.origin')
        self.recurrent_d = self.recurrent_o if tied else capacity.RecurrentParams('lstm.destination')
        self.pop_params = population.PopParams(layers=train_config.pop_layers)
        self.fusion = head.FusionParams()
        self.heads = head.HeadParams()
        self.aux = competition.AuxHeads()

    @property
    def uses_population(self):
        return not self.config.ablated('no_pop')

    @property
    def uses_aux(self):
        return not self.config.ablated('no_com')

    def init_store(self, rng=None):
        """ Register every parameter in a fixed order from the init stream """
        config = self.config
        rng = rng or derive_rng(config.seed, STREAM_INIT)
        size = config.embed_size
        count = self.dataset.region_count
        store = ParameterStore()
        self.attribute_params.register(store, self.dataset.attribute_count, size, rng)
        store.add(TIME_TABLE, (transform.HOURS_PER_DAY, size), rng, fan_in=size)
        self.generator_o.register(store, size, rng)
        if self.generator_d is not self.generator_o:
            self.generator_d.register(store, size, rng)
        self.tables.register(store, count, size, rng, tied=config.ablated('no_bb'))
        self.recurrent_o.register(store, size, rng)
        if self.recurrent_d is not self.recurrent_o:
            self.recurrent_d.register(store, size, rng)
        if self.uses_population:
            self.pop_params.register(store, count, size, rng)
            self.fusion.register(store, size, rng)
        elif self.uses_aux and config.variant == 'edge':
            store.add(self.pop_params.table, (count, size), rng, fan_in=size)
        self.heads.register(store, size, rng)
        if self.uses_aux:
            self.aux.register(store, config.k2, size, rng, variant=config.variant)
        return store

    def attention(self, tape, hour):
        """ Attention context of an hour from the current attribute embeddings """
        operator = (self.dataset.cooccurrence if self.config.ablated('no_attg')
                    else self.dataset.hyper_operator)
        a = transform.attribute_embeddings(tape, self.attribute_params, operator)
        return transform.time_attend(tape, a, hour, tape.param(TIME_TABLE))

    def transforms(self, tape, hour):
        """ (W''_o, W''_d, alpha) for the target hour """
        if self.config.ablated('no_tran'):
            return (tape.param(self.generator_o.base), tape.param(self.generator_d.base), None)
        context = self.attention(tape, hour)
        w_o = transform.generate_transform(tape, context.t_a, self.generator_o)
        if self.generator_d is self.generator_o:
            w_d = w_o
        else:
            w_d = transform.generate_transform(tape, context.t_a, self.generator_d)
        return w_o, w_d, context.alpha

    def population_embeddings(self, tape):
        g = tape.param(self.pop_params.table)
        for index in range(self.pop_params.layers):
            g = population.pop_gcn(tape, g, None, tape.param(self.pop_params.layer(index)),
                                   activation=self.config.pop_activation,
                                   normalized=self.dataset.pop_operator)
        return g

    def forward(self, tape, k, rng=None, with_loss=True):
        """
        Build the prediction of frame k from frames k-window..k-1.
        :param rng: negative-sampling generator for the edge variant; a per-target stream of
            the run seed is used when omitted so that repeated evaluations agree
        :param with_loss: also build the OD and auxiliary losses
        """
        config = self.config
        window = config.window
        if not window <= k < self.dataset.series.frame_count:
            raise RactcDataError('ERROR: Target frame %s needs %s earlier frames within %s' % (
                k, window, self.dataset.series.frame_count))
        hour = int(self.dataset.hours[k])
        w_o, w_d, alpha = self.transforms(tape, hour)
        o_prime, d_prime = capacity.run_bilateral(
            tape, self.dataset.pairs[k - window:k], self.tables, w_o, w_d, self.recurrent_o,
            self.recurrent_d, config.gcn_layers, window=window, activation=config.gcn_activation)

        g_out = None
        if self.uses_population:
            g_out = self.population_embeddings(tape)
            o_pop = population.enhance_origin(
                tape, g_out, o_prime, tape.param(self.pop_params.gate_weight),
                tape.param(self.pop_params.gate_bias), tape.param(self.pop_params.slope))
            o2 = head.fuse_origin(tape, o_pop, o_prime, g_out, tape.param(self.fusion.w_theta),
                                  tape.param(self.fusion.b_theta))
        else:
            o2 = o_prime
        yhat = head.predict(tape, o2, d_prime, self.heads)
        if not with_loss:
            return ForwardResult(yhat=yhat, od_loss=None, aux_loss=None, total=None, alpha=alpha)

        l_od = head.od_loss(tape, yhat, self.dataset.frames[k])
        l_aux = None
        reverse = not config.ablated('no_comr')
        if self.uses_aux and config.variant == 'cluster':
            l_aux = competition.cluster_loss(tape, d_prime, self.dataset.cluster_labels,
                                             tape.param(self.aux.w_n), reverse=reverse)
        elif self.uses_aux:
            if rng is None:
                rng = derive_rng(config.seed, '%s/%s' % (STREAM_NEGATIVE_SAMPLING, k))
            g_edge = g_out if g_out is not None else tape.param(self.pop_params.table)
            edges = competition.observed_edges(self.dataset.frames[k - window:k])
            l_aux = competition.edge_loss(tape, o_prime, d_prime, g_edge, edges,
                                          comp=self.dataset.competition,
                                          w_eg=tape.param(self.aux.w_eg), rng=rng,
                                          reverse=reverse)
        total = head.total_loss(tape, l_od, l_aux, config.gamma, config.aux_sign)
        return ForwardResult(yhat=yhat, od_loss=l_od, aux_loss=l_aux, total=total, alpha=alpha)

    def predict_frames(self, store, targets):
        """ Predicted N x N matrices of the target frames from a frozen store """
        predictions = []
        for k in targets:
            tape = Tape(store, grad_enabled=False)
            predictions.append(self.forward(tape, k, with_loss=False).yhat.value)
        return np.array(predictions).reshape(
            (len(predictions), self.dataset.region_count, self.dataset.region_count))

    def attention_weights(self, store, hours=range(transform.HOURS_PER_DAY)):
        """ List of (hour, alpha) from a frozen store """
        rows = []
        for hour in hours:
            tape = Tape(store, grad_enabled=False)
            rows.append((hour, self.attention(tape, hour).alpha.value.copy()))
        return rows
