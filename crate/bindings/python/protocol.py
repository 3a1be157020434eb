# Generated by the tinybuf schema compiler. Do not edit.
import struct
from dataclasses import dataclass, field
from typing import List, Optional


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    pass


def _take(buf, off, n):
    if len(buf) - off < n:
        raise DecodeError("input truncated at offset %d" % off)
    return buf[off:off + n], off + n


def _scalar(fmt, width, buf, off):
    raw, off = _take(buf, off, width)
    return struct.unpack(fmt, raw)[0], off


def _count(width, buf, off):
    raw, off = _take(buf, off, width)
    return int.from_bytes(raw, "little"), off


class _Message:
    def encode(self) -> bytes:
        out = bytearray()
        self._write(out)
        return bytes(out)

    @classmethod
    def decode(cls, data):
        data = bytes(data)
        msg, off = cls._read(data, 0)
        if off != len(data):
            raise DecodeError("%d trailing bytes after message" % (len(data) - off))
        return msg

    @classmethod
    def decode_prefix(cls, data, offset=0):
        return cls._read(bytes(data), offset)


@dataclass
class Timestamp(_Message):
    seconds: int = 0
    ms: int = 0

    def _write(self, out):
        if self.seconds is None:
            raise EncodeError("required field Timestamp.seconds is missing")
        out += struct.pack('<I', self.seconds)
        if self.ms is None:
            raise EncodeError("required field Timestamp.ms is missing")
        out += struct.pack('<H', self.ms)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.seconds, off = _scalar('<I', 4, buf, off)
        msg.ms, off = _scalar('<H', 2, buf, off)
        return msg, off


@dataclass
class MicrophoneChunk(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    sample_period_ms: int = 0
    data: List[int] = field(default_factory=list)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field MicrophoneChunk.timestamp is missing")
        self.timestamp._write(out)
        if self.sample_period_ms is None:
            raise EncodeError("required field MicrophoneChunk.sample_period_ms is missing")
        out += struct.pack('<H', self.sample_period_ms)
        if len(self.data) > 112:
            raise EncodeError("MicrophoneChunk.data holds more than 112 elements")
        out += len(self.data).to_bytes(1, "little")
        for v in self.data:
            out += struct.pack('<B', v)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        msg.sample_period_ms, off = _scalar('<H', 2, buf, off)
        n, off = _count(1, buf, off)
        if n > 112:
            raise DecodeError("data announces %d elements, limit 112" % n)
        msg.data = []
        for _ in range(n):
            v, off = _scalar('<B', 1, buf, off)
            msg.data.append(v)
        return msg, off


@dataclass
class ScanResultData(_Message):
    id: int = 0
    rssi: int = 0
    count: int = 0

    def _write(self, out):
        if self.id is None:
            raise EncodeError("required field ScanResultData.id is missing")
        out += struct.pack('<H', self.id)
        if self.rssi is None:
            raise EncodeError("required field ScanResultData.rssi is missing")
        out += struct.pack('<b', self.rssi)
        if self.count is None:
            raise EncodeError("required field ScanResultData.count is missing")
        out += struct.pack('<B', self.count)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.id, off = _scalar('<H', 2, buf, off)
        msg.rssi, off = _scalar('<b', 1, buf, off)
        msg.count, off = _scalar('<B', 1, buf, off)
        return msg, off


@dataclass
class ScanChunk(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    devices: List["ScanResultData"] = field(default_factory=list)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field ScanChunk.timestamp is missing")
        self.timestamp._write(out)
        if len(self.devices) > 255:
            raise EncodeError("ScanChunk.devices holds more than 255 elements")
        out += len(self.devices).to_bytes(1, "little")
        for v in self.devices:
            v._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        n, off = _count(1, buf, off)
        if n > 255:
            raise DecodeError("devices announces %d elements, limit 255" % n)
        msg.devices = []
        for _ in range(n):
            v, off = ScanResultData._read(buf, off)
            msg.devices.append(v)
        return msg, off


@dataclass
class AccelChunk(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    magnitudes: List[int] = field(default_factory=list)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field AccelChunk.timestamp is missing")
        self.timestamp._write(out)
        if len(self.magnitudes) > 50:
            raise EncodeError("AccelChunk.magnitudes holds more than 50 elements")
        out += len(self.magnitudes).to_bytes(1, "little")
        for v in self.magnitudes:
            out += struct.pack('<H', v)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        n, off = _count(1, buf, off)
        if n > 50:
            raise DecodeError("magnitudes announces %d elements, limit 50" % n)
        msg.magnitudes = []
        for _ in range(n):
            v, off = _scalar('<H', 2, buf, off)
            msg.magnitudes.append(v)
        return msg, off


@dataclass
class AccelEventChunk(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field AccelEventChunk.timestamp is missing")
        self.timestamp._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        return msg, off


@dataclass
class BatteryChunk(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    voltage: float = 0.0

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field BatteryChunk.timestamp is missing")
        self.timestamp._write(out)
        if self.voltage is None:
            raise EncodeError("required field BatteryChunk.voltage is missing")
        out += struct.pack('<f', self.voltage)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        msg.voltage, off = _scalar('<f', 4, buf, off)
        return msg, off


@dataclass
class MicrophoneConfig(_Message):
    avg_period_ms: int = 0

    def _write(self, out):
        if self.avg_period_ms is None:
            raise EncodeError("required field MicrophoneConfig.avg_period_ms is missing")
        out += struct.pack('<H', self.avg_period_ms)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.avg_period_ms, off = _scalar('<H', 2, buf, off)
        return msg, off


@dataclass
class ScanConfig(_Message):
    window_ms: int = 0
    interval_ms: int = 0
    duration_ms: int = 0
    period_s: int = 0
    aggregation: int = 0

    def _write(self, out):
        if self.window_ms is None:
            raise EncodeError("required field ScanConfig.window_ms is missing")
        out += struct.pack('<H', self.window_ms)
        if self.interval_ms is None:
            raise EncodeError("required field ScanConfig.interval_ms is missing")
        out += struct.pack('<H', self.interval_ms)
        if self.duration_ms is None:
            raise EncodeError("required field ScanConfig.duration_ms is missing")
        out += struct.pack('<H', self.duration_ms)
        if self.period_s is None:
            raise EncodeError("required field ScanConfig.period_s is missing")
        out += struct.pack('<H', self.period_s)
        if self.aggregation is None:
            raise EncodeError("required field ScanConfig.aggregation is missing")
        out += struct.pack('<B', self.aggregation)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.window_ms, off = _scalar('<H', 2, buf, off)
        msg.interval_ms, off = _scalar('<H', 2, buf, off)
        msg.duration_ms, off = _scalar('<H', 2, buf, off)
        msg.period_s, off = _scalar('<H', 2, buf, off)
        msg.aggregation, off = _scalar('<B', 1, buf, off)
        return msg, off


@dataclass
class AccelConfig(_Message):
    datarate_hz: int = 0
    mode: int = 0
    full_scale_g: int = 0
    fifo_read_period_ms: int = 0

    def _write(self, out):
        if self.datarate_hz is None:
            raise EncodeError("required field AccelConfig.datarate_hz is missing")
        out += struct.pack('<H', self.datarate_hz)
        if self.mode is None:
            raise EncodeError("required field AccelConfig.mode is missing")
        out += struct.pack('<B', self.mode)
        if self.full_scale_g is None:
            raise EncodeError("required field AccelConfig.full_scale_g is missing")
        out += struct.pack('<B', self.full_scale_g)
        if self.fifo_read_period_ms is None:
            raise EncodeError("required field AccelConfig.fifo_read_period_ms is missing")
        out += struct.pack('<H', self.fifo_read_period_ms)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.datarate_hz, off = _scalar('<H', 2, buf, off)
        msg.mode, off = _scalar('<B', 1, buf, off)
        msg.full_scale_g, off = _scalar('<B', 1, buf, off)
        msg.fifo_read_period_ms, off = _scalar('<H', 2, buf, off)
        return msg, off


@dataclass
class AccelEventConfig(_Message):
    threshold_mg: int = 0
    min_duration_ms: int = 0
    dead_time_ms: int = 0

    def _write(self, out):
        if self.threshold_mg is None:
            raise EncodeError("required field AccelEventConfig.threshold_mg is missing")
        out += struct.pack('<H', self.threshold_mg)
        if self.min_duration_ms is None:
            raise EncodeError("required field AccelEventConfig.min_duration_ms is missing")
        out += struct.pack('<H', self.min_duration_ms)
        if self.dead_time_ms is None:
            raise EncodeError("required field AccelEventConfig.dead_time_ms is missing")
        out += struct.pack('<H', self.dead_time_ms)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.threshold_mg, off = _scalar('<H', 2, buf, off)
        msg.min_duration_ms, off = _scalar('<H', 2, buf, off)
        msg.dead_time_ms, off = _scalar('<H', 2, buf, off)
        return msg, off


@dataclass
class BatteryConfig(_Message):
    read_period_s: int = 0

    def _write(self, out):
        if self.read_period_s is None:
            raise EncodeError("required field BatteryConfig.read_period_s is missing")
        out += struct.pack('<H', self.read_period_s)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.read_period_s, off = _scalar('<H', 2, buf, off)
        return msg, off


@dataclass
class Empty(_Message):
    pass

    def _write(self, out):
        pass

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        return msg, off


@dataclass
class Assignment(_Message):
    id: int = 0
    group: int = 0

    def _write(self, out):
        if self.id is None:
            raise EncodeError("required field Assignment.id is missing")
        out += struct.pack('<H', self.id)
        if self.group is None:
            raise EncodeError("required field Assignment.group is missing")
        out += struct.pack('<B', self.group)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.id, off = _scalar('<H', 2, buf, off)
        msg.group, off = _scalar('<B', 1, buf, off)
        return msg, off


@dataclass
class StatusRequest(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    assignment: Optional["Assignment"] = None

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field StatusRequest.timestamp is missing")
        self.timestamp._write(out)
        if self.assignment is None:
            out.append(0)
        else:
            out.append(1)
            self.assignment._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        flag, off = _count(1, buf, off)
        if flag == 1:
            msg.assignment, off = Assignment._read(buf, off)
        elif flag != 0:
            raise DecodeError("invalid presence byte %d for assignment" % flag)
        return msg, off


@dataclass
class DataRequest(_Message):
    source: int = 0
    since: Timestamp = field(default_factory=Timestamp)

    def _write(self, out):
        if self.source is None:
            raise EncodeError("required field DataRequest.source is missing")
        out += struct.pack('<B', self.source)
        if self.since is None:
            raise EncodeError("required field DataRequest.since is missing")
        self.since._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.source, off = _scalar('<B', 1, buf, off)
        msg.since, off = Timestamp._read(buf, off)
        return msg, off


@dataclass
class IdentifyRequest(_Message):
    led: int = 0
    seconds: int = 0

    def _write(self, out):
        if self.led is None:
            raise EncodeError("required field IdentifyRequest.led is missing")
        out += struct.pack('<B', self.led)
        if self.seconds is None:
            raise EncodeError("required field IdentifyRequest.seconds is missing")
        out += struct.pack('<H', self.seconds)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.led, off = _scalar('<B', 1, buf, off)
        msg.seconds, off = _scalar('<H', 2, buf, off)
        return msg, off


@dataclass
class Request(_Message):
    status: Optional["StatusRequest"] = None
    start_microphone: Optional["MicrophoneConfig"] = None
    start_scan: Optional["ScanConfig"] = None
    start_accel: Optional["AccelConfig"] = None
    start_accel_event: Optional["AccelEventConfig"] = None
    start_battery: Optional["BatteryConfig"] = None
    stop_microphone: Optional["Empty"] = None
    stop_scan: Optional["Empty"] = None
    stop_accel: Optional["Empty"] = None
    stop_accel_event: Optional["Empty"] = None
    stop_battery: Optional["Empty"] = None
    stream_start_microphone: Optional["Empty"] = None
    stream_start_scan: Optional["Empty"] = None
    stream_start_accel: Optional["Empty"] = None
    stream_start_accel_event: Optional["Empty"] = None
    stream_start_battery: Optional["Empty"] = None
    stream_stop_microphone: Optional["Empty"] = None
    stream_stop_scan: Optional["Empty"] = None
    stream_stop_accel: Optional["Empty"] = None
    stream_stop_accel_event: Optional["Empty"] = None
    stream_stop_battery: Optional["Empty"] = None
    data_request: Optional["DataRequest"] = None
    restart: Optional["Empty"] = None
    identify: Optional["IdentifyRequest"] = None
    selftest: Optional["Empty"] = None

    def which_kind(self):
        if self.status is not None:
            return "status"
        if self.start_microphone is not None:
            return "start_microphone"
        if self.start_scan is not None:
            return "start_scan"
        if self.start_accel is not None:
            return "start_accel"
        if self.start_accel_event is not None:
            return "start_accel_event"
        if self.start_battery is not None:
            return "start_battery"
        if self.stop_microphone is not None:
            return "stop_microphone"
        if self.stop_scan is not None:
            return "stop_scan"
        if self.stop_accel is not None:
            return "stop_accel"
        if self.stop_accel_event is not None:
            return "stop_accel_event"
        if self.stop_battery is not None:
            return "stop_battery"
        if self.stream_start_microphone is not None:
            return "stream_start_microphone"
        if self.stream_start_scan is not None:
            return "stream_start_scan"
        if self.stream_start_accel is not None:
            return "stream_start_accel"
        if self.stream_start_accel_event is not None:
            return "stream_start_accel_event"
        if self.stream_start_battery is not None:
            return "stream_start_battery"
        if self.stream_stop_microphone is not None:
            return "stream_stop_microphone"
        if self.stream_stop_scan is not None:
            return "stream_stop_scan"
        if self.stream_stop_accel is not None:
            return "stream_stop_accel"
        if self.stream_stop_accel_event is not None:
            return "stream_stop_accel_event"
        if self.stream_stop_battery is not None:
            return "stream_stop_battery"
        if self.data_request is not None:
            return "data_request"
        if self.restart is not None:
            return "restart"
        if self.identify is not None:
            return "identify"
        if self.selftest is not None:
            return "selftest"
        return None

    def _write(self, out):
        _set = [v is not None for v in (self.status, self.start_microphone, self.start_scan, self.start_accel, self.start_accel_event, self.start_battery, self.stop_microphone, self.stop_scan, self.stop_accel, self.stop_accel_event, self.stop_battery, self.stream_start_microphone, self.stream_start_scan, self.stream_start_accel, self.stream_start_accel_event, self.stream_start_battery, self.stream_stop_microphone, self.stream_stop_scan, self.stream_stop_accel, self.stream_stop_accel_event, self.stream_stop_battery, self.data_request, self.restart, self.identify, self.selftest,)]
        if sum(_set) > 1:
            raise EncodeError("oneof Request.kind has more than one member set")
        if sum(_set) == 0:
            raise EncodeError("oneof Request.kind has no member set")
        if self.status is not None:
            out.append(1)
            self.status._write(out)
        if self.start_microphone is not None:
            out.append(2)
            self.start_microphone._write(out)
        if self.start_scan is not None:
            out.append(3)
            self.start_scan._write(out)
        if self.start_accel is not None:
            out.append(4)
            self.start_accel._write(out)
        if self.start_accel_event is not None:
            out.append(5)
            self.start_accel_event._write(out)
        if self.start_battery is not None:
            out.append(6)
            self.start_battery._write(out)
        if self.stop_microphone is not None:
            out.append(7)
            self.stop_microphone._write(out)
        if self.stop_scan is not None:
            out.append(8)
            self.stop_scan._write(out)
        if self.stop_accel is not None:
            out.append(9)
            self.stop_accel._write(out)
        if self.stop_accel_event is not None:
            out.append(10)
            self.stop_accel_event._write(out)
        if self.stop_battery is not None:
            out.append(11)
            self.stop_battery._write(out)
        if self.stream_start_microphone is not None:
            out.append(12)
            self.stream_start_microphone._write(out)
        if self.stream_start_scan is not None:
            out.append(13)
            self.stream_start_scan._write(out)
        if self.stream_start_accel is not None:
            out.append(14)
            self.stream_start_accel._write(out)
        if self.stream_start_accel_event is not None:
            out.append(15)
            self.stream_start_accel_event._write(out)
        if self.stream_start_battery is not None:
            out.append(16)
            self.stream_start_battery._write(out)
        if self.stream_stop_microphone is not None:
            out.append(17)
            self.stream_stop_microphone._write(out)
        if self.stream_stop_scan is not None:
            out.append(18)
            self.stream_stop_scan._write(out)
        if self.stream_stop_accel is not None:
            out.append(19)
            self.stream_stop_accel._write(out)
        if self.stream_stop_accel_event is not None:
            out.append(20)
            self.stream_stop_accel_event._write(out)
        if self.stream_stop_battery is not None:
            out.append(21)
            self.stream_stop_battery._write(out)
        if self.data_request is not None:
            out.append(22)
            self.data_request._write(out)
        if self.restart is not None:
            out.append(23)
            self.restart._write(out)
        if self.identify is not None:
            out.append(24)
            self.identify._write(out)
        if self.selftest is not None:
            out.append(25)
            self.selftest._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        tag, off = _count(1, buf, off)
        if tag == 1:
            msg.status, off = StatusRequest._read(buf, off)
        elif tag == 2:
            msg.start_microphone, off = MicrophoneConfig._read(buf, off)
        elif tag == 3:
            msg.start_scan, off = ScanConfig._read(buf, off)
        elif tag == 4:
            msg.start_accel, off = AccelConfig._read(buf, off)
        elif tag == 5:
            msg.start_accel_event, off = AccelEventConfig._read(buf, off)
        elif tag == 6:
            msg.start_battery, off = BatteryConfig._read(buf, off)
        elif tag == 7:
            msg.stop_microphone, off = Empty._read(buf, off)
        elif tag == 8:
            msg.stop_scan, off = Empty._read(buf, off)
        elif tag == 9:
            msg.stop_accel, off = Empty._read(buf, off)
        elif tag == 10:
            msg.stop_accel_event, off = Empty._read(buf, off)
        elif tag == 11:
            msg.stop_battery, off = Empty._read(buf, off)
        elif tag == 12:
            msg.stream_start_microphone, off = Empty._read(buf, off)
        elif tag == 13:
            msg.stream_start_scan, off = Empty._read(buf, off)
        elif tag == 14:
            msg.stream_start_accel, off = Empty._read(buf, off)
        elif tag == 15:
            msg.stream_start_accel_event, off = Empty._read(buf, off)
        elif tag == 16:
            msg.stream_start_battery, off = Empty._read(buf, off)
        elif tag == 17:
            msg.stream_stop_microphone, off = Empty._read(buf, off)
        elif tag == 18:
            msg.stream_stop_scan, off = Empty._read(buf, off)
        elif tag == 19:
            msg.stream_stop_accel, off = Empty._read(buf, off)
        elif tag == 20:
            msg.stream_stop_accel_event, off = Empty._read(buf, off)
        elif tag == 21:
            msg.stream_stop_battery, off = Empty._read(buf, off)
        elif tag == 22:
            msg.data_request, off = DataRequest._read(buf, off)
        elif tag == 23:
            msg.restart, off = Empty._read(buf, off)
        elif tag == 24:
            msg.identify, off = IdentifyRequest._read(buf, off)
        elif tag == 25:
            msg.selftest, off = Empty._read(buf, off)
        elif True:
            raise DecodeError("invalid tag %d for oneof kind" % tag)
        return msg, off


@dataclass
class StatusResponse(_Message):
    status_flags: int = 0
    id: int = 0
    group: int = 0
    battery: int = 0
    timestamp: Timestamp = field(default_factory=Timestamp)
    before_sync: Optional["Timestamp"] = None

    def _write(self, out):
        if self.status_flags is None:
            raise EncodeError("required field StatusResponse.status_flags is missing")
        out += struct.pack('<B', self.status_flags)
        if self.id is None:
            raise EncodeError("required field StatusResponse.id is missing")
        out += struct.pack('<H', self.id)
        if self.group is None:
            raise EncodeError("required field StatusResponse.group is missing")
        out += struct.pack('<B', self.group)
        if self.battery is None:
            raise EncodeError("required field StatusResponse.battery is missing")
        out += struct.pack('<B', self.battery)
        if self.timestamp is None:
            raise EncodeError("required field StatusResponse.timestamp is missing")
        self.timestamp._write(out)
        if self.before_sync is None:
            out.append(0)
        else:
            out.append(1)
            self.before_sync._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.status_flags, off = _scalar('<B', 1, buf, off)
        msg.id, off = _scalar('<H', 2, buf, off)
        msg.group, off = _scalar('<B', 1, buf, off)
        msg.battery, off = _scalar('<B', 1, buf, off)
        msg.timestamp, off = Timestamp._read(buf, off)
        flag, off = _count(1, buf, off)
        if flag == 1:
            msg.before_sync, off = Timestamp._read(buf, off)
        elif flag != 0:
            raise DecodeError("invalid presence byte %d for before_sync" % flag)
        return msg, off


@dataclass
class DataEnd(_Message):
    source: int = 0
    chunks: int = 0
    corrupted: int = 0

    def _write(self, out):
        if self.source is None:
            raise EncodeError("required field DataEnd.source is missing")
        out += struct.pack('<B', self.source)
        if self.chunks is None:
            raise EncodeError("required field DataEnd.chunks is missing")
        out += struct.pack('<I', self.chunks)
        if self.corrupted is None:
            raise EncodeError("required field DataEnd.corrupted is missing")
        out += struct.pack('<H', self.corrupted)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.source, off = _scalar('<B', 1, buf, off)
        msg.chunks, off = _scalar('<I', 4, buf, off)
        msg.corrupted, off = _scalar('<H', 2, buf, off)
        return msg, off


@dataclass
class SelftestResponse(_Message):
    passed: int = 0
    failed: int = 0

    def _write(self, out):
        if self.passed is None:
            raise EncodeError("required field SelftestResponse.passed is missing")
        out += struct.pack('<B', self.passed)
        if self.failed is None:
            raise EncodeError("required field SelftestResponse.failed is missing")
        out += struct.pack('<B', self.failed)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.passed, off = _scalar('<B', 1, buf, off)
        msg.failed, off = _scalar('<B', 1, buf, off)
        return msg, off


@dataclass
class ErrorResponse(_Message):
    code: int = 0

    def _write(self, out):
        if self.code is None:
            raise EncodeError("required field ErrorResponse.code is missing")
        out += struct.pack('<B', self.code)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.code, off = _scalar('<B', 1, buf, off)
        return msg, off


@dataclass
class MicrophoneStream(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    values: List[int] = field(default_factory=list)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field MicrophoneStream.timestamp is missing")
        self.timestamp._write(out)
        if len(self.values) > 16:
            raise EncodeError("MicrophoneStream.values holds more than 16 elements")
        out += len(self.values).to_bytes(1, "little")
        for v in self.values:
            out += struct.pack('<B', v)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        n, off = _count(1, buf, off)
        if n > 16:
            raise DecodeError("values announces %d elements, limit 16" % n)
        msg.values = []
        for _ in range(n):
            v, off = _scalar('<B', 1, buf, off)
            msg.values.append(v)
        return msg, off


@dataclass
class ScanObservation(_Message):
    id: int = 0
    rssi: int = 0

    def _write(self, out):
        if self.id is None:
            raise EncodeError("required field ScanObservation.id is missing")
        out += struct.pack('<H', self.id)
        if self.rssi is None:
            raise EncodeError("required field ScanObservation.rssi is missing")
        out += struct.pack('<b', self.rssi)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.id, off = _scalar('<H', 2, buf, off)
        msg.rssi, off = _scalar('<b', 1, buf, off)
        return msg, off


@dataclass
class ScanStream(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    observations: List["ScanObservation"] = field(default_factory=list)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field ScanStream.timestamp is missing")
        self.timestamp._write(out)
        if len(self.observations) > 8:
            raise EncodeError("ScanStream.observations holds more than 8 elements")
        out += len(self.observations).to_bytes(1, "little")
        for v in self.observations:
            v._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        n, off = _count(1, buf, off)
        if n > 8:
            raise DecodeError("observations announces %d elements, limit 8" % n)
        msg.observations = []
        for _ in range(n):
            v, off = ScanObservation._read(buf, off)
            msg.observations.append(v)
        return msg, off


@dataclass
class AccelSample(_Message):
    x: int = 0
    y: int = 0
    z: int = 0

    def _write(self, out):
        if self.x is None:
            raise EncodeError("required field AccelSample.x is missing")
        out += struct.pack('<h', self.x)
        if self.y is None:
            raise EncodeError("required field AccelSample.y is missing")
        out += struct.pack('<h', self.y)
        if self.z is None:
            raise EncodeError("required field AccelSample.z is missing")
        out += struct.pack('<h', self.z)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.x, off = _scalar('<h', 2, buf, off)
        msg.y, off = _scalar('<h', 2, buf, off)
        msg.z, off = _scalar('<h', 2, buf, off)
        return msg, off


@dataclass
class AccelStream(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    samples: List["AccelSample"] = field(default_factory=list)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field AccelStream.timestamp is missing")
        self.timestamp._write(out)
        if len(self.samples) > 8:
            raise EncodeError("AccelStream.samples holds more than 8 elements")
        out += len(self.samples).to_bytes(1, "little")
        for v in self.samples:
            v._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        n, off = _count(1, buf, off)
        if n > 8:
            raise DecodeError("samples announces %d elements, limit 8" % n)
        msg.samples = []
        for _ in range(n):
            v, off = AccelSample._read(buf, off)
            msg.samples.append(v)
        return msg, off


@dataclass
class AccelEventStream(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field AccelEventStream.timestamp is missing")
        self.timestamp._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        return msg, off


@dataclass
class BatteryStream(_Message):
    timestamp: Timestamp = field(default_factory=Timestamp)
    voltage: float = 0.0

    def _write(self, out):
        if self.timestamp is None:
            raise EncodeError("required field BatteryStream.timestamp is missing")
        self.timestamp._write(out)
        if self.voltage is None:
            raise EncodeError("required field BatteryStream.voltage is missing")
        out += struct.pack('<f', self.voltage)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        msg.timestamp, off = Timestamp._read(buf, off)
        msg.voltage, off = _scalar('<f', 4, buf, off)
        return msg, off


@dataclass
class Response(_Message):
    status: Optional["StatusResponse"] = None
    microphone_chunk: Optional["MicrophoneChunk"] = None
    scan_chunk: Optional["ScanChunk"] = None
    accel_chunk: Optional["AccelChunk"] = None
    accel_event_chunk: Optional["AccelEventChunk"] = None
    battery_chunk: Optional["BatteryChunk"] = None
    data_end: Optional["DataEnd"] = None
    selftest: Optional["SelftestResponse"] = None
    error: Optional["ErrorResponse"] = None
    microphone_stream: Optional["MicrophoneStream"] = None
    scan_stream: Optional["ScanStream"] = None
    accel_stream: Optional["AccelStream"] = None
    accel_event_stream: Optional["AccelEventStream"] = None
    battery_stream: Optional["BatteryStream"] = None

    def which_kind(self):
        if self.status is not None:
            return "status"
        if self.microphone_chunk is not None:
            return "microphone_chunk"
        if self.scan_chunk is not None:
            return "scan_chunk"
        if self.accel_chunk is not None:
            return "accel_chunk"
        if self.accel_event_chunk is not None:
            return "accel_event_chunk"
        if self.battery_chunk is not None:
            return "battery_chunk"
        if self.data_end is not None:
            return "data_end"
        if self.selftest is not None:
            return "selftest"
        if self.error is not None:
            return "error"
        if self.microphone_stream is not None:
            return "microphone_stream"
        if self.scan_stream is not None:
            return "scan_stream"
        if self.accel_stream is not None:
            return "accel_stream"
        if self.accel_event_stream is not None:
            return "accel_event_stream"
        if self.battery_stream is not None:
            return "battery_stream"
        return None

    def _write(self, out):
        _set = [v is not None for v in (self.status, self.microphone_chunk, self.scan_chunk, self.accel_chunk, self.accel_event_chunk, self.battery_chunk, self.data_end, self.selftest, self.error, self.microphone_stream, self.scan_stream, self.accel_stream, self.accel_event_stream, self.battery_stream,)]
        if sum(_set) > 1:
            raise EncodeError("oneof Response.kind has more than one member set")
        if sum(_set) == 0:
            raise EncodeError("oneof Response.kind has no member set")
        if self.status is not None:
            out.append(1)
            self.status._write(out)
        if self.microphone_chunk is not None:
            out.append(2)
            self.microphone_chunk._write(out)
        if self.scan_chunk is not None:
            out.append(3)
            self.scan_chunk._write(out)
        if self.accel_chunk is not None:
            out.append(4)
            self.accel_chunk._write(out)
        if self.accel_event_chunk is not None:
            out.append(5)
            self.accel_event_chunk._write(out)
        if self.battery_chunk is not None:
            out.append(6)
            self.battery_chunk._write(out)
        if self.data_end is not None:
            out.append(7)
            self.data_end._write(out)
        if self.selftest is not None:
            out.append(8)
            self.selftest._write(out)
        if self.error is not None:
            out.append(9)
            self.error._write(out)
        if self.microphone_stream is not None:
            out.append(10)
            self.microphone_stream._write(out)
        if self.scan_stream is not None:
            out.append(11)
            self.scan_stream._write(out)
        if self.accel_stream is not None:
            out.append(12)
            self.accel_stream._write(out)
        if self.accel_event_stream is not None:
            out.append(13)
            self.accel_event_stream._write(out)
        if self.battery_stream is not None:
            out.append(14)
            self.battery_stream._write(out)

    @classmethod
    def _read(cls, buf, off):
        msg = cls()
        tag, off = _count(1, buf, off)
        if tag == 1:
            msg.status, off = StatusResponse._read(buf, off)
        elif tag == 2:
            msg.microphone_chunk, off = MicrophoneChunk._read(buf, off)
        elif tag == 3:
            msg.scan_chunk, off = ScanChunk._read(buf, off)
        elif tag == 4:
            msg.accel_chunk, off = AccelChunk._read(buf, off)
        elif tag == 5:
            msg.accel_event_chunk, off = AccelEventChunk._read(buf, off)
        elif tag == 6:
            msg.battery_chunk, off = BatteryChunk._read(buf, off)
        elif tag == 7:
            msg.data_end, off = DataEnd._read(buf, off)
        elif tag == 8:
            msg.selftest, off = SelftestResponse._read(buf, off)
        elif tag == 9:
            msg.error, off = ErrorResponse._read(buf, off)
        elif tag == 10:
            msg.microphone_stream, off = MicrophoneStream._read(buf, off)
        elif tag == 11:
            msg.scan_stream, off = ScanStream._read(buf, off)
        elif tag == 12:
            msg.accel_stream, off = AccelStream._read(buf, off)
        elif tag == 13:
            msg.accel_event_stream, off = AccelEventStream._read(buf, off)
        elif tag == 14:
            msg.battery_stream, off = BatteryStream._read(buf, off)
        elif True:
            raise DecodeError("invalid tag %d for oneof kind" % tag)
        return msg, off


MESSAGES = ["Timestamp", "MicrophoneChunk", "ScanResultData", "ScanChunk", "AccelChunk", "AccelEventChunk", "BatteryChunk", "MicrophoneConfig", "ScanConfig", "AccelConfig", "AccelEventConfig", "BatteryConfig", "Empty", "Assignment", "StatusRequest", "DataRequest", "IdentifyRequest", "Request", "StatusResponse", "DataEnd", "SelftestResponse", "ErrorResponse", "MicrophoneStream", "ScanObservation", "ScanStream", "AccelSample", "AccelStream", "AccelEventStream", "BatteryStream", "Response"]
