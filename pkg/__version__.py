__version__="1.0.0"
__author__="plcautomata developers"
__description__="Learn PLC state automata from sensor traces with OTALA and an LSTM classifier"
__license__="MIT"
