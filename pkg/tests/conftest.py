import pytest

from ratingchain.contract import AveragingMode
from ratingchain.crypto import generate_keypair, hash32
from ratingchain.ledger import CallFn, CallPayload, Genesis, Transaction


def kp(tag: str):
    return generate_keypair(hash32(f"test-key:{tag}".encode()))


CONTRACT = hash32(b"test-contract")[-20:]
PRODUCT_A = hash32(b"test-product-a")[-20:]
PRODUCT_B = hash32(b"test-product-b")[-20:]


@pytest.fixture
def validator():
    return kp("validator")


@pytest.fixture
def owner():
    return kp("owner")


@pytest.fixture
def rater():
    return kp("rater")


def make_genesis(validators=None, owner_kp=None, raters=(), mode=AveragingMode.CORRECTED,
                 products=((PRODUCT_A, "Kaza Restaurant"), (PRODUCT_B, "House Cafe")),
                 extra_allocs=(), faucet=True):
    validators = validators or [kp("validator")]
    owner_kp = owner_kp or kp("owner")
    allocations = [(owner_kp.address, 10**24)]
    allocations += [(r.address, 10**21) for r in raters]
    allocations += list(extra_allocs)
    return Genesis(
        authorities=tuple(v.address for v in validators),
        owner=owner_kp.address,
        contract_address=CONTRACT,
        mode=mode,
        faucet_enabled=faucet,
        allocations=tuple(allocations),
        products=tuple(products),
        raters=tuple(r.address for r in raters),
    )


@pytest.fixture
def genesis(validator, owner, rater):
    return make_genesis([validator], owner, raters=[rater])


def make_tx(sender_kp, nonce, call, to=CONTRACT, value=0, gas_limit=6721975, gas_price=1):
    return Transaction(
        nonce=nonce,
        sender=sender_kp.address,
        sender_pubkey=sender_kp.public_key,
        to=to,
        value=value,
        gas_limit=gas_limit,
        gas_price=gas_price,
        call=call,
    ).signed(sender_kp.secret_key)


def grant_tx(owner_kp, rater_addr, nonce=0, **kw):
    return make_tx(owner_kp, nonce, CallPayload(CallFn.GIVE_RIGHT_TO_RATE, rater=rater_addr), **kw)


def rate_tx(rater_kp, product, value, nonce=0, **kw):
    return make_tx(rater_kp, nonce, CallPayload(CallFn.SET_RATE, product=product, value=value), **kw)
