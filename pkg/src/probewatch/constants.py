"""
Protocol numbers, container constants and pipeline defaults.
"""

from enum import IntEnum

PCAP_MAGIC = 0xA1B2C3D4
PCAP_MAGIC_SWAPPED = 0xD4C3B2A1
PCAP_VERSION_MAJOR = 2
PCAP_VERSION_MINOR = 4
PCAP_SNAPLEN = 65535
LINKTYPE_ETHERNET = 1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16

ETHERNET_HEADER_LEN = 14
ETHERNET_MIN_FRAME = 60
IPV4_HEADER_LEN = 20
TCP_HEADER_LEN = 20
UDP_HEADER_LEN = 8
ICMP_HEADER_LEN = 8

TCP_OPT_MSS = 2
TCP_OPT_WSCALE = 3
ICMP_ECHO_REQUEST = 8
ICMP_ECHO_REPLY = 0

MICROS = 1_000_000

DEFAULT_SEGMENT_SIZE = 2_000_000
TCP_IDLE_TIMEOUT = 60.0
OTHER_IDLE_TIMEOUT = 30.0
TEMPORAL_WINDOW = 2.0

MISSING_THRESHOLD = 0.9
STRUCTURAL_SENTINEL = -1.0
SPLIT_RATIOS = (0.6, 0.2, 0.2)

TARGET_CORRELATION_THRESHOLD = 0.3
FILTER_TOP_K = 25
PRUNE_THRESHOLD = 0.75
GA_GENERATIONS = 50
GA_POPULATION = 50

LABEL_COLUMN = "label"
MISSING_COLUMN = "missing"
KEY_COLUMNS = ("start_us", "src_ip", "dst_ip", "src_port", "dst_port", "proto")

UNSW_RECON_CATEGORY = "reconnaissance"


class Protocol(IntEnum):
    ICMP = 1
    TCP = 6
    UDP = 17


class TCPFlag(IntEnum):
    FIN = 0x01
    SYN = 0x02
    RST = 0x04
    PSH = 0x08
    ACK = 0x10
    URG = 0x20

    @staticmethod
    def is_set(flags: int, flag: "TCPFlag") -> bool:
        return flags & flag == flag


SYN_ACK = TCPFlag.SYN | TCPFlag.ACK
FIN_ACK = TCPFlag.FIN | TCPFlag.ACK
RST_ACK = TCPFlag.RST | TCPFlag.ACK
PSH_ACK = TCPFlag.PSH | TCPFlag.ACK
XMAS = TCPFlag.PSH | TCPFlag.URG | TCPFlag.FIN


class MissingReason(IntEnum):
    NONE = 0
    PLAUSIBLE = 1
    STRUCTURAL = 2
