"""
Input validation for netbridge documents
Uses Marshmallow for schema validation of every JSON input and output
"""
import json
import os
from functools import wraps

from marshmallow import EXCLUDE, Schema, ValidationError, fields, validate, validates_schema

from model.errors import InvalidInputError, SpecIOError


class PathOrInline(fields.Field):
    """A nested document given inline (object) or by file path (string)"""

    def _deserialize(self, value, attr, data, **kwargs):
        if isinstance(value, (str, dict)):
            return value
        raise ValidationError('Expected an object or a file path.')


# Input Schemas

class EdgeSchema(Schema):
    """One directed edge; nodes are 1-based"""
    source = fields.Int(required=True, data_key='from', validate=validate.Range(min=1))
    target = fields.Int(required=True, data_key='to', validate=validate.Range(min=1))
    length = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))

    class Meta:
        unknown = EXCLUDE


class GraphSchema(Schema):
    """Graph input file"""
    n = fields.Int(required=True, validate=validate.Range(min=2))
    edges = fields.List(fields.Nested(EdgeSchema), required=True)

    class Meta:
        unknown = EXCLUDE

    @validates_schema
    def check_nodes(self, data, **kwargs):
        for edge in data['edges']:
            if edge['source'] > data['n'] or edge['target'] > data['n']:
                raise ValidationError(f"edge {edge['source']}->{edge['target']} leaves 1..{data['n']}", 'edges')


class PriorSpecSchema(Schema):
    """Prior spec: Boltzmann, Ruelle-Bowen or a custom Markov chain"""
    type = fields.Str(required=True, validate=validate.OneOf(['boltzmann', 'ruelle_bowen', 'custom']))
    T = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))
    N = fields.Int(load_default=None, allow_none=True, validate=validate.Range(min=1))
    p0 = fields.List(fields.Float(), load_default=None, allow_none=True)
    steps = fields.Raw(load_default=None, allow_none=True)

    class Meta:
        unknown = EXCLUDE

    @validates_schema
    def check_type_fields(self, data, **kwargs):
        kind = data['type']
        if kind == 'boltzmann' and data['T'] is None:
            raise ValidationError('A Boltzmann prior needs a temperature.', 'T')
        if kind in ('boltzmann', 'ruelle_bowen') and data['N'] is None:
            raise ValidationError('The horizon N is required.', 'N')
        if kind == 'custom' and (data['p0'] is None or data['steps'] is None):
            raise ValidationError('A custom prior needs p0 and steps.', 'steps')


class MarginalSideSchema(Schema):
    """Known part of one endpoint marginal"""
    nodes = fields.List(fields.Int(validate=validate.Range(min=1)), required=True,
                        validate=validate.Length(min=1))
    values = fields.List(fields.Float(validate=validate.Range(min=0)), required=True)

    class Meta:
        unknown = EXCLUDE

    @validates_schema
    def check_lengths(self, data, **kwargs):
        if len(data['nodes']) != len(data['values']):
            raise ValidationError('nodes and values must have the same length.', 'values')


class MarginalSpecSchema(Schema):
    """Marginal spec; omit a side for a half-bridge"""
    initial = fields.Nested(MarginalSideSchema, load_default=None, allow_none=True)
    final = fields.Nested(MarginalSideSchema, load_default=None, allow_none=True)

    class Meta:
        unknown = EXCLUDE

    @validates_schema
    def check_sides(self, data, **kwargs):
        if data['initial'] is None and data['final'] is None:
            raise ValidationError('At least one of initial/final is required.')


class MomentSideSchema(Schema):
    """Moment targets for one endpoint"""
    mean = fields.Float(required=True)
    second_moment = fields.Float(load_default=None, allow_none=True)

    class Meta:
        unknown = EXCLUDE


class MomentSpecSchema(Schema):
    """Moment spec; either side may be omitted"""
    order = fields.Int(load_default=1, validate=validate.OneOf([1, 2]))
    initial = fields.Nested(MomentSideSchema, load_default=None, allow_none=True)
    final = fields.Nested(MomentSideSchema, load_default=None, allow_none=True)
    node_values = fields.List(fields.Float(), load_default=None, allow_none=True)

    class Meta:
        unknown = EXCLUDE

    @validates_schema
    def check_sides(self, data, **kwargs):
        if data['initial'] is None and data['final'] is None:
            raise ValidationError('At least one of initial/final is required.')


class RunConfigSchema(Schema):
    """One batch run; nested documents are inline or paths relative to this file"""
    graph = PathOrInline(required=True)
    prior = PathOrInline(required=True)
    marginals = PathOrInline(load_default=None, allow_none=True)
    moments = PathOrInline(load_default=None, allow_none=True)
    tol = fields.Float(load_default=None, allow_none=True, validate=validate.Range(min=0, min_inclusive=False))
    max_iter = fields.Int(load_default=None, allow_none=True, validate=validate.Range(min=1))
    output_dir = fields.Str(load_default=None, allow_none=True)
    output_formats = fields.List(fields.Str(validate=validate.OneOf(['csv', 'json', 'dot'])),
                                 load_default=None, allow_none=True)

    class Meta:
        unknown = EXCLUDE

    @validates_schema
    def check_constraints(self, data, **kwargs):
        if (data['marginals'] is None) == (data['moments'] is None):
            raise ValidationError('Exactly one of marginals / moments is required.')


# Output Schemas

class DualSchema(Schema):
    """Multipliers of a moment-constrained solve"""
    lam = fields.Float()
    mu = fields.Float()
    alpha = fields.Float()
    beta = fields.Float()
    theta = fields.Float()
    objective = fields.Float()
    grad_norm = fields.Float()
    iterations = fields.Int()
    converged = fields.Bool()
    capped = fields.Bool()


class SolutionSchema(Schema):
    """solution.json; node labels are 1-based"""
    nodes = fields.List(fields.Int())
    method = fields.Str()
    phi0 = fields.List(fields.Float())
    phiN = fields.List(fields.Float())
    phihat0 = fields.List(fields.Float())
    phihatN = fields.List(fields.Float())
    q0N = fields.List(fields.List(fields.Float()))
    q0_star = fields.List(fields.Float())
    qN_star = fields.List(fields.Float())
    iterations = fields.Int()
    final_gap = fields.Float()
    kl_value = fields.Float()
    converged = fields.Bool()
    contraction_bound = fields.Float(allow_none=True)
    gap_history = fields.List(fields.Float())
    dual = fields.Nested(DualSchema, allow_none=True)


# Decorator for validating input documents

def read_json(path):
    """Parse a JSON file, mapping I/O and syntax problems to SpecIOError"""
    try:
        with open(path, encoding='utf-8') as fh:
            return json.load(fh)
    except OSError as err:
        raise SpecIOError(f"cannot read {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise SpecIOError(f"{path} is not valid JSON: {err}") from err


def validate_spec(schema_class):
    """
    Decorator to validate an input document against a Marshmallow schema

    The wrapped loader receives the validated data. Its first argument may be
    a file path or an already-parsed document.

    Usage:
        @validate_spec(GraphSchema)
        def load_graph(validated_data):
            pass
    """
    def decorator(f):
        @wraps(f)
        def decorated_function(source, *args, **kwargs):
            schema = schema_class()
            if isinstance(source, (str, os.PathLike)):
                document = read_json(source)
                origin = os.fspath(source)
            else:
                document = source
                origin = schema_class.__name__.replace('Schema', '').lower()

            if not isinstance(document, dict):
                raise InvalidInputError(f"{origin}: expected a JSON object")
            try:
                validated_data = schema.load(document)
            except ValidationError as err:
                raise InvalidInputError(f"{origin}: validation failed: {err.messages}") from err

            return f(validated_data, *args, **kwargs)

        return decorated_function
    return decorator
