# file: grammar.py
# Grammar of run configuration files and of command-line overrides.
# All ParserElement instances are module globals; parse actions that build
# Python values live with the elements, the dict assembly is in config.py.
#
#   # comment
#   system     { g => 0.05  eps_rel => 0.08 }
#   integrator { frame => "rotating"  t_final => 3e4 }
#   analysis   { snapshot_times => [20000, 30000] }

import pyparsing as pp
from pyparsing import ParserElement
from pyparsing import common as ppc

ParserElement.enable_packrat()

LBRACK, RBRACK, LBRACE, RBRACE = map(pp.Suppress, "[]{}")
ARROW = pp.Suppress("=>")
EQUALS = pp.Suppress("=")

value = pp.Forward().set_name("value")

boolean = (
    pp.Keyword("true").set_parse_action(pp.replace_with(True))
    | pp.Keyword("false").set_parse_action(pp.replace_with(False))
).set_name("boolean")

# '#' to end of line, anywhere between tokens
line_comment = pp.Regex(r"#[^\r\n]*").set_name("line_comment")

quoted = (pp.QuotedString('"', esc_char="\\") | pp.QuotedString("'", esc_char="\\")).set_name("quoted")

# ints stay int; a point or exponent makes a float
number = ppc.number.copy().set_name("number")

# lab, rotating, fig1, out/fig1
bare_word = pp.Word(pp.alphas + "_", pp.alphanums + "_-./").set_name("bare_word")

key = pp.Word(pp.alphas + "_", pp.alphanums + "_").set_name("key")

value_list = pp.Group(LBRACK + pp.Optional(pp.DelimitedList(value)) + RBRACK).set_name("value_list")

value <<= boolean | number | quoted | value_list | bare_word

setting = pp.Group(key + ARROW + value).set_name("setting")

section = pp.Group(key + pp.Group(LBRACE + pp.ZeroOrMore(setting) + RBRACE)).set_name("section")

config = (pp.ZeroOrMore(section) + pp.StringEnd()).set_name("config")
config.ignore(line_comment)

# key=value on the command line; the value uses the file syntax
override = (key + EQUALS + value + pp.StringEnd()).set_name("override")

value_only = (value + pp.StringEnd()).set_name("value_only")
